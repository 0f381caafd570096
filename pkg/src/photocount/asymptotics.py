"""Closed-form limits of the photocount statistics and exponent fits.

* small-count power law  P(mu_r) ~ mu_r**(beta M / (2 r) - 1)  as mu_r -> 0
* far-from-threshold mean photocount, both sides of threshold
* position of the maximum of mu_1(Gamma) above threshold
* square-root divergence of P(mu_1) at the maximum photocount
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .photon_stats import LaserParams

#: Relative distance from threshold below which the far-from-threshold formula is refused.
THRESHOLD_BAND = 1e-3
#: Exponent of the density at an interior quadratic maximum of mu(Gamma).
PEAK_EXPONENT = -0.5


class ThresholdError(ValueError):
    """Far-from-threshold formula requested at (or too near) C = A."""


class NotDivergentError(ValueError):
    """Singularity fit requested on a density that does not diverge."""


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    stderr: float
    fit_window: tuple
    n_points: int
    target: float = math.nan
    tolerance: float = math.nan

    @property
    def passed(self) -> bool:
        return abs(self.exponent - self.target) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "stderr": self.stderr,
            "window": list(self.fit_window),
            "n_points": self.n_points,
            "target": self.target,
            "tolerance": self.tolerance,
            "pass": bool(self.passed) if math.isfinite(self.target) else None,
        }


def small_count_exponent(beta: int, M: int, r: int) -> float:
    if beta not in (1, 2) or M < 1 or r < 1:
        raise ValueError("need beta in {1, 2}, M >= 1, r >= 1")
    return beta * M / (2.0 * r) - 1.0


def asymptotic_mu1(params: LaserParams, gamma: float, exact_fallback: bool = False) -> float:
    """Mean photocount sufficiently far from threshold.

    ``t Gamma n_s (A - C) / C`` for ``C < A`` and ``t Gamma A / (C - A)`` for
    ``C > A``.  Within ``THRESHOLD_BAND`` of threshold both forms are wrong;
    this raises :class:`ThresholdError` unless ``exact_fallback`` is set, in
    which case the exact summation is returned.
    """
    if gamma < 0:
        raise ValueError("escape rate must be >= 0")
    A = params.gain_A
    C = params.total_loss(gamma)
    t = params.counting_time_t
    if abs(C - A) < THRESHOLD_BAND * A:
        if exact_fallback:
            from .photon_stats import mu_r

            return mu_r(params, gamma, 1)
        raise ThresholdError(f"C={C} within {THRESHOLD_BAND}*A of threshold")
    if C < A:
        return t * gamma * params.saturation_photon_number * (A - C) / C
    return t * gamma * A / (C - A)


def plateau_limit(params: LaserParams, r: int = 1) -> float:
    """Exact large-escape-rate limit of ``mu_r``.

    As ``C -> inf`` only the lowest photon numbers survive and
    ``mu_r -> r! (A t)**r prod_{k=1..r} n_s / (n_s + k)``; for ``n_s -> inf``
    this is the thermal plateau ``r! (A t)**r``.
    """
    ns = params.saturation_photon_number
    value = math.factorial(r) * (params.gain_A * params.counting_time_t) ** r
    for k in range(1, r + 1):
        value *= ns / (ns + k)
    return value


def gamma_star_analytic(gain_A: float, kappa: float) -> float:
    """Estimated escape rate of maximum photocount, ``sqrt(A kappa) - kappa``."""
    if gain_A < kappa or kappa < 0:
        raise ValueError("no interior maximum predicted unless gain_A > kappa >= 0")
    return math.sqrt(gain_A * kappa) - kappa


def _fit(x, y, window, target, tolerance) -> ExponentFit:
    ok = np.isfinite(y) & (y > 0) & np.isfinite(x) & (x > 0)
    x, y = x[ok], y[ok]
    if x.size < 10:
        raise ValueError(f"only {x.size} usable nodes in window {window}; need >= 10")
    res = linregress(np.log(x), np.log(y))
    return ExponentFit(float(res.slope), float(res.stderr), tuple(window), int(x.size), target, tolerance)


def fit_power_law(density, window, target: float = math.nan, tolerance: float = math.nan) -> ExponentFit:
    """Least-squares slope of log density against log mu on ``window`` (absolute mu units)."""
    lo, hi = window
    mu = np.asarray(density.mu_grid)
    rho = np.asarray(density.density)
    sel = (mu >= lo) & (mu <= hi) & _regular(density)
    return _fit(mu[sel], rho[sel], (lo, hi), target, tolerance)


def fit_singularity_at_max(
    density, mu_max: float, window=(0.90, 0.999), tolerance: float = math.nan
) -> ExponentFit:
    """Slope of log density against log(mu_max - mu) on ``window`` (fractions of mu_max).

    Raises :class:`NotDivergentError` if the density does not grow towards
    ``mu_max`` over the window, as happens below threshold.
    """
    lo, hi = window[0] * mu_max, window[1] * mu_max
    mu = np.asarray(density.mu_grid)
    rho = np.asarray(density.density)
    sel = (mu >= lo) & (mu <= hi) & _regular(density) & np.isfinite(rho)
    if sel.sum() >= 2:
        near = rho[sel]
        # compare averages of the outer tenths of the window
        k = max(1, near.size // 10)
        if not near[-k:].mean() > near[:k].mean():
            raise NotDivergentError("density does not increase towards mu_max")
    return _fit(mu_max - mu[sel], rho[sel], tuple(window), PEAK_EXPONENT, tolerance)


def _regular(density) -> np.ndarray:
    flags = getattr(density, "node_flags", None)
    if flags is None:
        return np.ones(len(density.mu_grid), dtype=bool)
    return np.array([f in ("", "shoulder") for f in flags], dtype=bool)
