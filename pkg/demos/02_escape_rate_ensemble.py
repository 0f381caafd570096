"""
Escape rates of a chaotic cavity
================================

The escape rate Gamma of a mode is chi-squared distributed with
nu = beta * M degrees of freedom; nu = 1 is the Porter-Thomas law.
"""

import numpy as np
from scipy import stats

from photocount import ModeEnsemble, RngHandle, gamma_cdf, gaussian_limit_stats, sample_gamma

rng = RngHandle(seed=7)

for beta, M in [(1, 1), (2, 1), (2, 50)]:
    ens = ModeEnsemble(beta=beta, channels_M=M, mean_gamma=0.2)
    g = sample_gamma(ens, rng.child(ens.nu), 200_000)
    ks = stats.kstest(g, lambda x: gamma_cdf(ens, x)).statistic
    mean, std = gaussian_limit_stats(ens)
    print(
        f"nu = {ens.nu:3d}: sample mean {g.mean():.4f} (expect {mean}), "
        f"std {g.std():.4f} (expect {std:.4f}), skew {stats.skew(g):+.3f}, KS {ks:.4f}"
    )

# Porter-Thomas: about 8% of modes have an escape rate below 1% of the mean.
pt = ModeEnsemble(1, 1, 0.2)
print("P(Gamma < Gamma_bar / 100) =", round(float(gamma_cdf(pt, 0.002)), 4))

# Same seed and stream: same draws.
a = sample_gamma(pt, RngHandle(1, 2), 5)
b = sample_gamma(pt, RngHandle(1, 2), 5)
print("reproducible:", np.array_equal(a, b))
