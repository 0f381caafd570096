"""
Mean photocount as a function of the escape rate
================================================

Above the ensemble threshold (A > kappa) mu_1(Gamma) has an interior maximum
at Gamma* ~ sqrt(A kappa) - kappa and then falls onto a plateau; below
threshold it rises monotonically towards the same plateau.
"""

import numpy as np

from photocount import (
    LaserParams,
    asymptotic_mu1,
    build_response_curve,
    classify_threshold,
    gamma_star_analytic,
    invert_on_branch,
)

for kappa in (0.7, 2.0):
    laser = LaserParams(1.0, 0.005, kappa)
    curve = build_response_curve(laser, r=1, gamma_max=4.0, grid_points=400)
    print(f"kappa = {kappa}: {classify_threshold(laser).value}, {len(curve.branches)} branch(es)")
    if curve.peak:
        gs, mu_max = curve.peak
        print(f"  Gamma* = {gs:.5f} (estimate {gamma_star_analytic(1.0, kappa):.5f}), mu_max = {mu_max:.4f}")
        # one value just below the maximum has a preimage on each branch
        target = 0.99 * mu_max
        print("  preimages of 0.99 mu_max:", [round(invert_on_branch(curve, b, target), 5) for b in (0, 1)])
    print(f"  plateau (Gamma -> inf) = {curve.plateau_estimate:.5f}")

    # compare with the far-from-threshold formulas where |A - C| >= 0.2 A
    for g in (0.02, 0.5, 3.0):
        C = g + kappa
        if abs(1.0 - C) >= 0.2:
            exact = curve.evaluate(g)
            approx = asymptotic_mu1(laser, g)
            print(f"  Gamma = {g}: exact {exact:.5f}, asymptotic {approx:.5f}, rel diff {abs(approx / exact - 1):.3f}")
