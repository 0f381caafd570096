"""Stationary photon-number distribution of a saturable single-mode laser.

The distribution is

    P_n = N * (A n_s / C)**(n + n_s) / Gamma(n + n_s + 1),    n = 0, 1, 2, ...

with gain ``A``, saturation ``B``, total loss ``C`` and saturation photon
number ``n_s = A / B``.  Everything is done in log space: for the parameter
ranges of interest the unnormalized weights span several hundred decades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

#: Log-probability drop (natural log units) below the mode at which the upper tail is cut.
LOG_DROP = 40.0
#: Bound on the probability mass discarded beyond ``n_max``.
TAIL_TOL = 1e-12
#: Largest truncation index accepted before giving up.
N_MAX_CAP = 10_000_000
#: Largest factorial-moment order served by :func:`factorial_moment`.
MOMENT_ORDER_CAP = 8


class TruncationError(RuntimeError):
    """Raised when the adaptive truncation index would exceed its cap."""


@dataclass(frozen=True)
class LaserParams:
    """Laser parameters of one ensemble, rates in units of the gain.

    Parameters
    ----------
    gain_A : float
        Linear gain coefficient.
    saturation_B : float
        Nonlinear saturation coefficient.
    absorption_kappa : float
        Absorption loss rate (the non-random part of the total loss).
    counting_time_t : float
        Photodetection counting time; a pure scale factor on the moments.
    """

    gain_A: float
    saturation_B: float
    absorption_kappa: float
    counting_time_t: float = 1.0

    def __post_init__(self):
        for name in ("gain_A", "saturation_B", "absorption_kappa", "counting_time_t"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.gain_A <= 0:
            raise ValueError(f"gain_A must be > 0, got {self.gain_A}")
        if self.saturation_B <= 0:
            raise ValueError(
                f"saturation_B must be > 0 (n_s = A/B undefined), got {self.saturation_B}"
            )
        if self.absorption_kappa < 0:
            raise ValueError(f"absorption_kappa must be >= 0, got {self.absorption_kappa}")
        if self.counting_time_t <= 0:
            raise ValueError(f"counting_time_t must be > 0, got {self.counting_time_t}")
        if not math.isfinite(self.saturation_photon_number):
            raise ValueError("saturation photon number A/B overflows")

    @property
    def saturation_photon_number(self) -> float:
        return self.gain_A / self.saturation_B

    def total_loss(self, escape_gamma: float) -> float:
        return escape_gamma + self.absorption_kappa

    def to_dict(self) -> dict:
        return {
            "gain_A": self.gain_A,
            "saturation_B": self.saturation_B,
            "absorption_kappa": self.absorption_kappa,
            "counting_time_t": self.counting_time_t,
        }


@dataclass(frozen=True)
class PhotonDistribution:
    """Truncated photon-number distribution ``P_n`` for ``n = 0..n_max``.

    ``log_probabilities`` is kept next to ``probabilities`` because the
    latter underflow to zero far from the mode.
    """

    probabilities: np.ndarray
    n_max: int
    log_norm: float = math.nan
    total_loss_C: float = math.nan
    log_probabilities: np.ndarray | None = field(default=None, repr=False)
    tail_mass: float = 0.0

    @classmethod
    def from_probabilities(cls, probabilities, normalize: bool = True) -> "PhotonDistribution":
        """Wrap an explicit probability vector (used for point masses, Poisson checks)."""
        p = np.asarray(probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a non-empty 1-d array")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if normalize:
            p = p / math.fsum(p)
        with np.errstate(divide="ignore"):
            logp = np.log(p)
        return cls(probabilities=p, n_max=p.size - 1, log_probabilities=logp)

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.n_max + 1)

    @property
    def total(self) -> float:
        return math.fsum(self.probabilities)


def _log_x(params: LaserParams, total_loss_C):
    # log(A n_s / C), formed from logs so A n_s never overflows on its own
    return (
        math.log(params.gain_A)
        + math.log(params.saturation_photon_number)
        - np.log(total_loss_C)
    )


def _log_weights(n, ns: float, log_x):
    return (n + ns) * log_x - gammaln(n + ns + 1.0)


def _mode(ns: float, log_x: float) -> int:
    # P_{n+1}/P_n = x/(n+n_s+1) >= 1  <=>  n <= x - n_s - 1
    x = math.exp(log_x) if log_x < 700 else math.inf
    if not math.isfinite(x) or x - ns > N_MAX_CAP:
        raise TruncationError(f"distribution mode beyond cap {N_MAX_CAP} (A n_s/C = {x:.3g})")
    return max(0, int(math.floor(x - ns)))


def truncation_index(ns: float, log_x: float, n_cap: int = N_MAX_CAP) -> int:
    """Smallest ``n_max`` whose discarded upper tail is below ``TAIL_TOL``.

    Starts at the mode, walks up until the log-weight has dropped ``LOG_DROP``
    below the modal value, then keeps extending until a geometric-series bound
    on the remaining tail is small enough.
    """
    mode = _mode(ns, log_x)
    log_mode = float(_log_weights(mode, ns, log_x))
    span = max(64, int(12 * math.sqrt(math.exp(min(log_x, 700.0))) + 64))
    lo = mode
    while True:
        hi = min(lo + span, n_cap)
        n = np.arange(lo, hi + 1, dtype=float)
        drop = log_mode - _log_weights(n, ns, log_x)
        past = np.nonzero(drop >= LOG_DROP)[0]
        if past.size:
            n_max = lo + int(past[0])
            break
        if hi >= n_cap:
            raise TruncationError(f"truncation index would exceed cap {n_cap}")
        lo, span = hi, 2 * span
    # ratio of successive weights only decreases past the mode -> geometric bound
    while True:
        q = math.exp(log_x - math.log(n_max + ns + 2.0))
        rel = math.exp(float(_log_weights(n_max, ns, log_x)) - log_mode)
        if q < 1.0 and rel * q / (1.0 - q) < TAIL_TOL:
            return n_max
        n_max += max(1, n_max // 8)
        if n_max > n_cap:
            raise TruncationError(f"truncation index would exceed cap {n_cap}")


def compute_photon_distribution(
    params: LaserParams, total_loss_C: float, n_cap: int = N_MAX_CAP
) -> PhotonDistribution:
    """Stationary photon-number distribution for total loss ``C``.

    All terms from ``n = 0`` up to the adaptive truncation index are computed
    exactly; only the upper tail is cut (mass below ``TAIL_TOL``).
    """
    if not total_loss_C > 0:
        raise ValueError(f"total loss C must be > 0, got {total_loss_C}")
    ns = params.saturation_photon_number
    log_x = float(_log_x(params, total_loss_C))
    if not math.isfinite(log_x):
        raise FloatingPointError(f"non-finite log(A n_s / C) for C={total_loss_C}")
    n_max = truncation_index(ns, log_x, n_cap)
    n = np.arange(n_max + 1, dtype=float)
    logw = _log_weights(n, ns, log_x)
    if not np.all(np.isfinite(logw)):
        raise FloatingPointError("non-finite log-weights")
    lse = _logsumexp(logw)
    logp = logw - lse
    p = np.exp(logp)
    q = math.exp(log_x - math.log(n_max + ns + 2.0))
    tail = float(p[-1]) * q / (1.0 - q)
    return PhotonDistribution(
        probabilities=p,
        n_max=n_max,
        log_norm=-lse,
        total_loss_C=float(total_loss_C),
        log_probabilities=logp,
        tail_mass=tail,
    )


def _logsumexp(a, axis=None):
    # scipy.special.logsumexp costs ~0.2 ms per call in validation overhead
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return out.item() if axis is None else np.squeeze(out, axis=axis)


def _falling_factorial(n: np.ndarray, r: int) -> np.ndarray:
    out = np.ones_like(n, dtype=float)
    for k in range(r):
        out *= n - k
    return out


def factorial_moment(dist: PhotonDistribution, r: int, r_cap: int = MOMENT_ORDER_CAP) -> float:
    """``sum_n n(n-1)...(n-r+1) P_n``."""
    if int(r) != r or r < 1:
        raise ValueError(f"moment order must be a positive integer, got {r!r}")
    if r > r_cap:
        raise ValueError(f"moment order {r} exceeds cap {r_cap}")
    terms = _falling_factorial(dist.n.astype(float), int(r)) * dist.probabilities
    # smallest weights first
    return math.fsum(np.sort(terms))


def mean_photon_number(dist: PhotonDistribution) -> float:
    return factorial_moment(dist, 1)


def fano_factor(dist: PhotonDistribution) -> float:
    """Variance over mean of the photon number."""
    m1 = factorial_moment(dist, 1)
    if m1 <= 0:
        raise ZeroDivisionError("Fano factor undefined for zero mean")
    m2 = factorial_moment(dist, 2)
    return (m2 + m1 - m1 * m1) / m1


def short_time_moments(params: LaserParams, escape_Gamma: float, r_max: int) -> list[float]:
    """Output factorial moments ``mu_r = (Gamma t)**r <:n^r:>`` for ``r = 1..r_max``.

    The photon distribution is evaluated at the total loss ``Gamma + kappa``,
    so the quantum average itself depends on the escape rate.
    """
    if escape_Gamma < 0:
        raise ValueError(f"escape rate must be >= 0, got {escape_Gamma}")
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    dist = compute_photon_distribution(params, params.total_loss(escape_Gamma))
    scale = escape_Gamma * params.counting_time_t
    return [scale**r * factorial_moment(dist, r) for r in range(1, r_max + 1)]


def mu_r(params: LaserParams, escape_Gamma: float, r: int = 1) -> float:
    """Single output factorial moment of order ``r`` (scalar convenience)."""
    return short_time_moments(params, escape_Gamma, r)[r - 1]


def moment_curve(params: LaserParams, gammas, r: int = 1, chunk_elems: int = 4_000_000) -> np.ndarray:
    """Vectorized ``mu_r`` for many escape rates.

    Same exact summation as :func:`short_time_moments`, batched over a common
    ``n`` range per chunk of sorted escape rates.  The range is set by the
    smallest total loss in the chunk, which has the widest distribution.
    """
    gammas = np.asarray(gammas, dtype=float)
    shape = gammas.shape
    g = gammas.ravel()
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("escape rates must be finite and >= 0")
    if r < 1 or r > MOMENT_ORDER_CAP:
        raise ValueError(f"moment order must be in 1..{MOMENT_ORDER_CAP}")
    C = g + params.absorption_kappa
    if np.any(C <= 0):
        raise ValueError("total loss C must be > 0")
    ns = params.saturation_photon_number
    order = np.argsort(g, kind="stable")
    out = np.empty_like(g)
    i = 0
    while i < g.size:
        n_max = truncation_index(ns, float(_log_x(params, C[order[i]])))
        size = max(1, chunk_elems // (n_max + 1))
        idx = order[i : i + size]
        n = np.arange(n_max + 1, dtype=float)
        logw = _log_weights(n[:, None], ns, _log_x(params, C[idx])[None, :])
        logp = logw - _logsumexp(logw, axis=0)
        ff = _falling_factorial(n, r)
        out[idx] = (ff[:, None] * np.exp(logp)).sum(axis=0)
        i += size
    out *= (g * params.counting_time_t) ** r
    return out.reshape(shape)
