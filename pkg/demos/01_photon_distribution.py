"""
Photon-number distribution of a single cavity mode
===================================================

The stationary distribution is a shifted Poisson law,
P_n ~ x**(n + n_s) / (n + n_s)!,  x = A n_s / C,  n_s = A / B.
Far above threshold (C << A) it is nearly Poissonian; far below it is
close to thermal.
"""

import numpy as np

from photocount import LaserParams, compute_photon_distribution, fano_factor, mean_photon_number

# reference laser: gain 1, nonlinearity 0.005 (n_s = 200), absorption 0.7
laser = LaserParams(gain_A=1.0, saturation_B=0.005, absorption_kappa=0.7)

for C in (0.1, 0.72, 1.0, 2.0, 10.0):
    dist = compute_photon_distribution(laser, C)
    mode = int(np.argmax(dist.probabilities))
    print(
        f"C = {C:5.2f}   n_max = {dist.n_max:5d}   mode = {mode:5d}   "
        f"<n> = {mean_photon_number(dist):10.4f}   Fano = {fano_factor(dist):7.4f}"
    )

# The Fano factor crosses over from ~A/(A - C) (Poissonian, above threshold)
# to ~C/(C - A) (thermal, below threshold); the thermal value is only reached
# once <n> << n_s.
