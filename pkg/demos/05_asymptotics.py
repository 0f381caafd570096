"""
Power laws of the photocount density
====================================

Near mu = 0 the density goes as mu_r**(beta M / (2 r) - 1).  Above threshold
it also diverges as (mu_max - mu)**(-1/2) at the maximum photocount.
"""

import numpy as np

from photocount import (
    LaserParams,
    ModeEnsemble,
    build_response_curve,
    density_deterministic,
    fit_power_law,
    fit_singularity_at_max,
    small_count_exponent,
)

laser = LaserParams(1.0, 0.005, 0.7)
for beta, r in [(1, 1), (1, 2), (2, 1)]:
    ens = ModeEnsemble(beta, 1, 0.2)
    curve = build_response_curve(laser, r, 4.0, 400)
    d = density_deterministic(curve, ens)
    target = small_count_exponent(beta, 1, r)
    fit = fit_power_law(d, (1e-4 * d.mu_max, 1e-2 * d.mu_max), target, 0.05)
    print(f"beta={beta} r={r}: fitted {fit.exponent:+.3f} +- {fit.stderr:.3f}, expected {target:+.3f}")

# The square-root law at mu_max only sets in close to the maximum when the
# ensemble is narrow compared with Gamma*; compare two windows.
for gbar in (0.2, 0.02):
    curve = build_response_curve(laser, 1, 20 * gbar, 400)
    ens = ModeEnsemble(1, 1, gbar)
    wide = fit_singularity_at_max(density_deterministic(curve, ens), curve.mu_max)
    probe = curve.mu_max * (1 - np.geomspace(1e-3, 1e-4, 40))
    exact = density_deterministic(curve, ens, probe, singular_width=0.0)
    inner = fit_singularity_at_max(exact, curve.mu_max, window=(0.999, 0.9999))
    print(f"Gamma_bar={gbar}: exponent {wide.exponent:+.3f} on (0.9, 0.999), {inner.exponent:+.3f} on (0.999, 0.9999)")
