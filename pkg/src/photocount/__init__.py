"""Photocount statistics of single-mode chaotic lasers.

The stationary photon-number distribution of a saturable single-mode laser is
combined with the chi-squared distribution of cavity escape rates over an
ensemble of chaotic modes to obtain the ensemble distribution of the output
factorial moments.
"""

from .photon_stats import (
    LaserParams,
    PhotonDistribution,
    compute_photon_distribution,
    factorial_moment,
    fano_factor,
    mean_photon_number,
    moment_curve,
    short_time_moments,
)
from .mode_ensemble import (
    ModeEnsemble,
    RngHandle,
    gamma_cdf,
    gamma_pdf,
    gamma_sf,
    gaussian_limit_stats,
    sample_gamma,
)
from .response_curve import (
    ThresholdClass,
    Branch,
    ResponseCurve,
    build_response_curve,
    classify_threshold,
    find_peak,
    invert_on_branch,
)
from .count_density import (
    CountDensity,
    compare_densities,
    density_deterministic,
    density_monte_carlo,
)
from .asymptotics import (
    ExponentFit,
    asymptotic_mu1,
    fit_power_law,
    fit_singularity_at_max,
    gamma_star_analytic,
    small_count_exponent,
)

__version__ = "0.1.0"
