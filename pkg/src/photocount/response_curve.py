"""Output moment as a function of the escape rate, ``mu_r(Gamma)``.

Above the ensemble threshold (gain larger than absorption) ``mu_1`` rises out
of the origin, peaks at ``Gamma*`` and falls back onto the large-``Gamma``
plateau; below threshold it rises monotonically towards the plateau.  The
curve is split into monotonic branches so that it can be inverted branch by
branch for the change of variables in :mod:`photocount.count_density`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .asymptotics import plateau_limit
from .photon_stats import LaserParams, moment_curve, mu_r

INCREASING = "increasing"
DECREASING = "decreasing"

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class ThresholdClass(str, enum.Enum):
    ABOVE = "above_ensemble"
    BELOW = "below_ensemble"


class CriticalThresholdWarning(UserWarning):
    pass


class AmbiguousPeakError(RuntimeError):
    def __init__(self, peaks):
        super().__init__(f"{len(peaks)} interior maxima found: {peaks}")
        self.peaks = peaks


@dataclass(frozen=True)
class Branch:
    """Monotonic piece ``gamma_grid[start:stop + 1]``.

    Neighbouring branches share their turning node.  ``open_ended`` marks the
    last branch, which continues past the grid towards the plateau.
    """

    start: int
    stop: int
    direction: str
    open_ended: bool = False


@dataclass
class ResponseCurve:
    moment_order_r: int
    gamma_grid: np.ndarray
    mu_values: np.ndarray
    func: Callable[[float], float] = field(repr=False)
    branches: list = field(default_factory=list)
    peak: Optional[tuple] = None
    plateau_estimate: float = math.nan
    params: Optional[LaserParams] = None
    peaks: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def mu_max(self) -> float:
        if self.peak is not None:
            return self.peak[1]
        if self.peaks:
            return max(p[1] for p in self.peaks)
        return self.plateau_estimate

    @property
    def is_monotone(self) -> bool:
        return len(self.branches) == 1

    def evaluate(self, gamma: float) -> float:
        return self.func(gamma)

    def branch_ids(self) -> np.ndarray:
        ids = np.empty(self.gamma_grid.size, dtype=int)
        for k in reversed(range(len(self.branches))):
            b = self.branches[k]
            ids[b.start : b.stop + 1] = k
        return ids

    def branch_range(self, branch: int) -> tuple[float, float]:
        """Closed value range covered by ``branch`` (plateau limit included for open branches)."""
        b = self.branches[branch]
        m = self.mu_values[b.start : b.stop + 1]
        lo, hi = float(m.min()), float(m.max())
        if b.open_ended and math.isfinite(self.plateau_estimate):
            if b.direction == INCREASING:
                hi = max(hi, self.plateau_estimate)
            else:
                lo = min(lo, self.plateau_estimate)
        return lo, hi


def golden_section_max(f, a: float, b: float, rtol: float = 1e-6, max_iter: int = 200) -> float:
    """Maximizer of a unimodal ``f`` on ``[a, b]``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rtol * max(abs(c), abs(d), 1e-300):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _interior_maxima(mu: np.ndarray) -> list[int]:
    return [i for i in range(1, mu.size - 1) if mu[i] > mu[i - 1] and mu[i] >= mu[i + 1]]


def find_peaks(curve: ResponseCurve, rtol: float = 1e-6) -> list[tuple[float, float]]:
    """All interior maxima of the tabulated curve, refined by golden-section search."""
    g, mu = curve.gamma_grid, curve.mu_values
    peaks = []
    for i in _interior_maxima(mu):
        gs = golden_section_max(curve.func, g[i - 1], g[i + 1], rtol=rtol)
        ms = curve.func(gs)
        if ms < mu[i]:
            gs, ms = float(g[i]), float(mu[i])
        peaks.append((float(gs), float(ms)))
    return peaks


def find_peak(curve: ResponseCurve, rtol: float = 1e-6) -> Optional[tuple[float, float]]:
    """``(gamma_star, mu_max)`` of the single interior maximum, or ``None`` for a monotone curve.

    Several maxima raise :class:`AmbiguousPeakError` carrying all of them.
    """
    peaks = find_peaks(curve, rtol)
    if len(peaks) > 1:
        raise AmbiguousPeakError(peaks)
    return peaks[0] if peaks else None


def _branches(mu: np.ndarray) -> list[Branch]:
    d = np.sign(np.diff(mu))
    # flat steps inherit the preceding direction
    for i in range(d.size):
        if d[i] == 0:
            d[i] = d[i - 1] if i else 1
    out, start = [], 0
    for i in range(1, d.size + 1):
        if i == d.size or d[i] != d[start]:
            out.append(Branch(start, i, INCREASING if d[start] > 0 else DECREASING))
            start = i
    last = out[-1]
    out[-1] = Branch(last.start, last.stop, last.direction, open_ended=True)
    return out


def _assemble(curve: ResponseCurve) -> ResponseCurve:
    curve.branches = _branches(curve.mu_values)
    try:
        curve.peak = find_peak(curve)
        curve.peaks = [curve.peak] if curve.peak else []
    except AmbiguousPeakError as exc:
        curve.peak = None
        curve.peaks = exc.peaks
        curve.flags.append("multiple_maxima")
    return curve


def build_response_curve(
    params: LaserParams,
    r: int = 1,
    gamma_max: float = 1.0,
    grid_points: int = 400,
    gamma_min: Optional[float] = None,
) -> ResponseCurve:
    """Tabulate ``mu_r`` on ``[0, gamma_max]``.

    The grid is logarithmic from ``gamma_min`` (default ``5e-6 * gamma_max``,
    i.e. ``1e-4`` mean escape rates for ``gamma_max = 20 Gamma_bar``) and is
    refined linearly over a window of width ``0.2 Gamma*`` around a detected
    peak, which itself is inserted as a grid node.
    """
    if grid_points < 200:
        raise ValueError(f"grid_points must be >= 200, got {grid_points}")
    if not gamma_max > 0:
        raise ValueError("gamma_max must be > 0")
    if gamma_min is None:
        gamma_min = 5e-6 * gamma_max
    if not 0 < gamma_min < gamma_max:
        raise ValueError("need 0 < gamma_min < gamma_max")

    def func(g):
        return mu_r(params, g, r)

    grid = np.concatenate([[0.0], np.geomspace(gamma_min, gamma_max, grid_points - 1)])
    curve = ResponseCurve(
        moment_order_r=r,
        gamma_grid=grid,
        mu_values=moment_curve(params, grid, r),
        func=func,
        plateau_estimate=plateau_limit(params, r),
        params=params,
    )
    peaks = find_peaks(curve)
    if peaks:
        extra = [np.linspace(0.9 * gs, 1.1 * gs, max(50, grid_points // 4)) for gs, _ in peaks]
        new = np.concatenate(extra)
        new = new[(new > 0) & (new < gamma_max)]
        grid = np.union1d(grid, new)
        mu = moment_curve(params, grid, r)
        for gs, ms in peaks:
            k = np.searchsorted(grid, gs)
            if k < grid.size and grid[k] == gs:
                mu[k] = ms
            else:
                grid = np.insert(grid, k, gs)
                mu = np.insert(mu, k, ms)
        curve.gamma_grid, curve.mu_values = grid, mu
    _assemble(curve)
    if curve.is_monotone and curve.mu_values[-1] > curve.plateau_estimate:
        curve.flags.append("grid_exceeds_plateau")
    return curve


def curve_from_function(func, gamma_grid, r: int = 1, plateau: float = math.nan) -> ResponseCurve:
    """Response curve for an arbitrary callable (calibration and testing)."""
    grid = np.asarray(gamma_grid, dtype=float)
    mu = np.array([func(g) for g in grid])
    return _assemble(ResponseCurve(r, grid, mu, func=func, plateau_estimate=plateau))


def classify_threshold(params: LaserParams) -> ThresholdClass:
    """Above-threshold ensemble iff gain exceeds absorption; ``A == kappa`` counts as below."""
    if params.gain_A == params.absorption_kappa:
        warnings.warn("gain equals absorption: critical ensemble, classified below", CriticalThresholdWarning)
    return ThresholdClass.ABOVE if params.gain_A > params.absorption_kappa else ThresholdClass.BELOW


def invert_on_branch(curve: ResponseCurve, branch: int, mu: float) -> float:
    """Escape rate on ``branch`` at which the curve takes the value ``mu``.

    Bisection on the tabulated branch picks the bracketing grid cell, then
    Brent's method refines against the exact curve.  On the open last branch,
    values between the last grid node and the plateau are bracketed by
    doubling the escape rate.
    """
    b = curve.branches[branch]
    lo, hi = curve.branch_range(branch)
    if not lo <= mu <= hi:
        raise ValueError(f"mu={mu!r} outside branch {branch} range [{lo}, {hi}]")
    g = curve.gamma_grid[b.start : b.stop + 1]
    m = curve.mu_values[b.start : b.stop + 1]
    sign = 1.0 if b.direction == INCREASING else -1.0

    def f(x):
        return sign * (curve.func(x) - mu)

    s = sign * (m - mu)  # increasing along the branch
    if s[-1] < 0:
        if not b.open_ended:
            raise ValueError(f"mu={mu!r} outside branch {branch}")
        a = float(g[-1])
        c = 2.0 * a
        while f(c) < 0:
            a, c = c, 2.0 * c
            if c > 1e15:
                raise ValueError(f"mu={mu!r} not reached before Gamma=1e15")
    else:
        j = int(np.searchsorted(s, 0.0))
        if s[j] == 0.0:
            return float(g[j])
        a, c = float(g[j - 1]), float(g[j])
    if f(a) == 0.0:
        return a
    return brentq(f, a, c, xtol=1e-14 * c, rtol=1e-14, maxiter=200)
