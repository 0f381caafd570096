"""Ensemble distribution of an output factorial moment.

``P(mu) = int dGamma P(Gamma) delta(mu - mu_r(Gamma))`` is evaluated two ways:

* deterministically, by change of variables over the monotonic branches of
  ``mu_r(Gamma)``: ``P(mu) = sum_i P(Gamma_i) / |mu_r'(Gamma_i)|``;
* by Monte Carlo, histogramming ``mu_r(Gamma)`` for sampled escape rates.

Bin masses of the deterministic density come from its exact CDF, i.e. from
the chi-squared CDF at the branch preimages of the bin edges.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from .asymptotics import PEAK_EXPONENT, small_count_exponent
from .mode_ensemble import ModeEnsemble, RngHandle, gamma_pdf, gamma_sf, sample_gamma
from .photon_stats import LaserParams, factorial_moment, compute_photon_distribution, moment_curve
from .response_curve import INCREASING, ResponseCurve, build_response_curve, invert_on_branch

DETERMINISTIC = "deterministic"
MONTE_CARLO = "monte_carlo"

#: Nodes closer than this fraction of mu_max to a divergent upper endpoint are exponent-matched.
SINGULAR_WIDTH = 1e-3
DEFAULT_BINS = 400
WORKERS_ENV = "PHOTOCOUNT_WORKERS"


class GridPathologyError(RuntimeError):
    """Vanishing branch derivative away from the peak."""


class IncompatibleGridError(ValueError):
    pass


@dataclass
class CountDensity:
    moment_order_r: int
    mu_grid: np.ndarray
    density: np.ndarray
    method: str
    mu_max: float
    singular_points: list = field(default_factory=list)
    mass_check: float = math.nan
    node_flags: Optional[list] = None
    bin_edges: Optional[np.ndarray] = None
    bin_mass: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def mu_over_mu_max(self) -> np.ndarray:
        return self.mu_grid / self.mu_max

    def shoulders(self) -> list[float]:
        if self.node_flags is None:
            return []
        return [float(m) for m, f in zip(self.mu_grid, self.node_flags) if f == "shoulder"]


def default_mu_grid(mu_max: float, points: int = 1200) -> np.ndarray:
    """Nodes on ``[0, mu_max]``: log-dense towards both endpoints, linear in between."""
    n_end = max(50, points // 6)
    n_mid = max(50, points - 2 * n_end - 2)
    lower = np.geomspace(1e-6, 0.02, n_end)
    middle = np.linspace(0.02, 0.98, n_mid)
    upper = 1.0 - np.geomspace(0.02, 1e-6, n_end)
    x = np.unique(np.concatenate([[0.0], lower, middle, upper, [1.0]]))
    return mu_max * x


def _derivative(curve: ResponseCurve, gammas: np.ndarray, mean_gamma: float) -> np.ndarray:
    """Central differences, one Richardson step, batched through the exact moment sum."""
    h = np.maximum(1e-4 * gammas, 1e-8 * mean_gamma)
    r = curve.moment_order_r
    if curve.params is not None:
        pts = np.concatenate([gammas + h, gammas - h, gammas + h / 2, gammas - h / 2])
        vals = moment_curve(curve.params, pts, r).reshape(4, -1)
    else:
        vals = np.array([[curve.func(g) for g in gg] for gg in (gammas + h, gammas - h, gammas + h / 2, gammas - h / 2)])
    d1 = (vals[0] - vals[1]) / (2 * h)
    d2 = (vals[2] - vals[3]) / h
    return (4 * d2 - d1) / 3


def _zero_limit(curve: ResponseCurve, ensemble: ModeEnsemble, exponent: float) -> float:
    if exponent < 0:
        return math.inf
    if exponent > 0:
        return 0.0
    # nu == 2r: P ~ A_nu Gamma^(r-1), mu ~ (Gamma t)^r f_r(kappa)  =>  finite limit
    r = curve.moment_order_r
    params = curve.params
    if params is None or params.absorption_kappa <= 0:
        return math.nan
    f_r = factorial_moment(compute_photon_distribution(params, params.absorption_kappa), r)
    half = 0.5 * ensemble.nu
    a_nu = (half / ensemble.mean_gamma) ** half / math.gamma(half)
    return a_nu / (r * params.counting_time_t**r * f_r)


def _powerlaw_segment(x0, x1, y0, y1):
    # integral of the power law through (x0, y0), (x1, y1); x > 0, y > 0
    k = math.log(y1 / y0) / math.log(x1 / x0)
    if abs(k + 1.0) < 1e-9:
        return y0 * x0 * math.log(x1 / x0)
    return y0 * x0 / (k + 1.0) * ((x1 / x0) ** (k + 1.0) - 1.0)


def integrate_density(mu, rho, mu_max, zero_exponent, max_exponent) -> float:
    """Mass of a node density with integrable endpoint singularities.

    Segments are integrated as local power laws in ``mu`` on the lower half
    and in ``mu_max - mu`` on the upper half; the slivers adjoining singular
    endpoints use the supplied endpoint exponents.  ``max_exponent=None``
    means the density vanishes at ``mu_max``.
    """
    ok = np.isfinite(rho) & (mu > 0) & (mu < mu_max)
    m, y = mu[ok], rho[ok]
    if m.size < 2:
        return math.nan
    total = m[0] * y[0] / (zero_exponent + 1.0)
    for a, b, ya, yb in zip(m[:-1], m[1:], y[:-1], y[1:]):
        if ya > 0 and yb > 0 and ya != yb:
            if b <= 0.5 * mu_max:
                total += _powerlaw_segment(a, b, ya, yb)
            else:
                total += _powerlaw_segment(mu_max - b, mu_max - a, yb, ya)
        else:
            total += 0.5 * (ya + yb) * (b - a)
    delta = mu_max - m[-1]
    if max_exponent is None:
        total += 0.5 * delta * y[-1]
    else:
        total += delta * y[-1] / (max_exponent + 1.0)
    return total


def count_cdf(curve: ResponseCurve, ensemble: ModeEnsemble, mu) -> np.ndarray:
    """``P(mu_r <= mu)`` from the escape-rate CDF at the branch preimages."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    out = np.zeros_like(mu)
    for k, b in enumerate(curve.branches):
        g_lo = float(curve.gamma_grid[b.start])
        g_hi = math.inf if b.open_ended else float(curve.gamma_grid[b.stop])
        lo, hi = curve.branch_range(k)
        sf_lo, sf_hi = gamma_sf(ensemble, g_lo), (0.0 if math.isinf(g_hi) else gamma_sf(ensemble, g_hi))
        for i, m in enumerate(mu):
            if m >= hi:
                out[i] += sf_lo - sf_hi
            elif m <= lo:
                continue
            else:
                g = invert_on_branch(curve, k, m)
                if b.direction == INCREASING:
                    out[i] += sf_lo - gamma_sf(ensemble, g)
                else:
                    out[i] += gamma_sf(ensemble, g) - sf_hi
    return out


def _annotate_shoulders(mu, rho, flags, mu_max):
    # interior local maxima away from the small-count divergence and the upper endpoint
    idx = [
        i
        for i in range(1, mu.size - 1)
        if flags[i] == ""
        and 0.05 * mu_max < mu[i] < 0.98 * mu_max
        and np.isfinite(rho[i - 1 : i + 2]).all()
        and rho[i] > rho[i - 1]
        and rho[i] >= rho[i + 1]
    ]
    for i in idx:
        flags[i] = "shoulder"


def density_deterministic(
    curve: ResponseCurve,
    ensemble: ModeEnsemble,
    mu_grid=None,
    bin_edges=None,
    singular_width: float = SINGULAR_WIDTH,
) -> CountDensity:
    """Change-of-variables density on ``mu_grid`` (array, point count, or ``None``).

    Nodes within ``singular_width * mu_max`` of a divergent ``mu_max`` are
    matched to the square-root law from the exactly evaluated node at that
    distance; the endpoint nodes themselves carry the limiting value.
    """
    mu_max = curve.mu_max
    above = curve.peak is not None
    if mu_grid is None:
        mu = default_mu_grid(mu_max)
    elif np.isscalar(mu_grid):
        mu = default_mu_grid(mu_max, int(mu_grid))
    else:
        mu = np.asarray(mu_grid, dtype=float)
    if np.any(np.diff(mu) <= 0) or mu[0] < 0 or mu[-1] > mu_max * (1 + 1e-12):
        raise ValueError("mu_grid must be strictly increasing within [0, mu_max]")

    beta, M, r = ensemble.beta, ensemble.channels_M, curve.moment_order_r
    a0 = small_count_exponent(beta, M, r)
    rho = np.zeros_like(mu)
    flags = [""] * mu.size
    singular = [{"location": 0.0, "exponent": a0, "kind": "small_count"}]
    if above:
        singular.append({"location": mu_max, "exponent": PEAK_EXPONENT, "kind": "peak"})
    else:
        singular.append({"location": mu_max, "exponent": None, "kind": "vanishing_at_plateau"})

    d_sing = singular_width * mu_max
    exact_nodes = []
    for i, m in enumerate(mu):
        if m == 0.0:
            rho[i] = _zero_limit(curve, ensemble, a0)
            flags[i] = "singular"
        elif m >= mu_max:
            rho[i] = math.inf if above else 0.0
            flags[i] = "singular"
        elif above and mu_max - m < d_sing:
            flags[i] = "matched"
        else:
            exact_nodes.append(i)

    # exact change of variables, derivatives batched
    roots, owners = [], []
    for i in exact_nodes:
        for k in range(len(curve.branches)):
            lo, hi = curve.branch_range(k)
            if lo <= mu[i] <= hi and not (curve.branches[k].open_ended and mu[i] == curve.plateau_estimate):
                roots.append(invert_on_branch(curve, k, mu[i]))
                owners.append(i)
    roots = np.asarray(roots)
    owners = np.asarray(owners, dtype=int)
    if roots.size:
        p = gamma_pdf(ensemble, roots)
        live = p > 0
        deriv = np.zeros_like(roots)
        if live.any():
            deriv[live] = _derivative(curve, roots[live], ensemble.mean_gamma)
        scale = np.maximum(roots, ensemble.mean_gamma) / mu_max
        peak_g = curve.peak[0] if above else None
        for j in np.nonzero(live)[0]:
            if abs(deriv[j]) * scale[j] < 1e-12 and not (peak_g and abs(roots[j] - peak_g) < 1e-3 * peak_g):
                raise GridPathologyError(f"vanishing derivative at Gamma={roots[j]:.6g}")
        contrib = np.where(live, p / np.where(live, np.abs(deriv), 1.0), 0.0)
        np.add.at(rho, owners, contrib)

    if above:
        m_ref = mu_max - d_sing
        matched = [i for i, f in enumerate(flags) if f == "matched"]
        if matched:
            rho_ref = float(
                density_deterministic(curve, ensemble, mu_grid=np.array([m_ref]), singular_width=0.0).density[0]
            )
            for i in matched:
                rho[i] = rho_ref * ((mu_max - mu[i]) / d_sing) ** PEAK_EXPONENT

    _annotate_shoulders(mu, rho, flags, mu_max)
    mass = integrate_density(mu, rho, mu_max, a0, PEAK_EXPONENT if above else None)

    edges = mass_arr = None
    if bin_edges is not None:
        edges = np.asarray(bin_edges, dtype=float)
        cdf = count_cdf(curve, ensemble, np.minimum(edges, mu_max))
        mass_arr = np.diff(cdf)

    meta = {"ensemble": ensemble.to_dict()}
    if curve.params is not None:
        meta["laser"] = curve.params.to_dict()
    return CountDensity(
        moment_order_r=r,
        mu_grid=mu,
        density=rho,
        method=DETERMINISTIC,
        mu_max=mu_max,
        singular_points=singular,
        mass_check=mass,
        node_flags=flags,
        bin_edges=edges,
        bin_mass=mass_arr,
        meta=meta,
    )


def mc_bin_edges(mu_max: float, bins: int = DEFAULT_BINS) -> np.ndarray:
    return np.linspace(0.0, 1.001 * mu_max, bins + 1)


def _workers(workers):
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def density_monte_carlo(
    params: LaserParams,
    ensemble: ModeEnsemble,
    r: int,
    rng: RngHandle,
    n_samples: int,
    bins: int = DEFAULT_BINS,
    mu_max: Optional[float] = None,
    workers: Optional[int] = None,
    chunk_size: int = 200_000,
) -> CountDensity:
    """Histogram of ``mu_r(Gamma)`` over sampled escape rates.

    Samples are drawn in fixed-size chunks, chunk ``k`` from substream ``k``
    of ``rng``, so the result does not depend on the number of workers.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    if mu_max is None:
        mu_max = build_response_curve(params, r, 20 * ensemble.mean_gamma, 400).mu_max
    edges = mc_bin_edges(mu_max, bins)
    sizes = [min(chunk_size, n_samples - s) for s in range(0, n_samples, chunk_size)]

    def run(k):
        g = sample_gamma(ensemble, rng, sizes[k], substream=k)
        counts, _ = np.histogram(moment_curve(params, g, r), bins=edges)
        return counts

    with ThreadPoolExecutor(_workers(workers)) as pool:
        counts = sum(pool.map(run, range(len(sizes))))
    width = edges[1] - edges[0]
    mass = counts / n_samples
    a0 = small_count_exponent(ensemble.beta, ensemble.channels_M, r)
    meta = {"laser": params.to_dict(), "ensemble": ensemble.to_dict(), "seed": rng.seed, "stream": rng.stream, "n_samples": n_samples}
    flags = [""] * bins
    flags[0] = flags[-1] = "endpoint_bin"
    return CountDensity(
        moment_order_r=r,
        mu_grid=0.5 * (edges[:-1] + edges[1:]),
        density=mass / width,
        method=MONTE_CARLO,
        mu_max=mu_max,
        singular_points=[
            {"location": 0.0, "exponent": a0, "kind": "small_count"},
            {"location": mu_max, "exponent": None, "kind": "upper_endpoint"},
        ],
        mass_check=float(counts.sum()) / n_samples,
        node_flags=flags,
        bin_edges=edges,
        bin_mass=mass,
        meta=meta,
    )


def compare_densities(a: CountDensity, b: CountDensity) -> tuple[float, float]:
    """``(total_variation, ks_statistic)`` between two densities on a common support.

    Binned densities are compared bin by bin with the two endpoint bins left
    out of the total variation; node densities are compared by trapezoidal
    integration over nodes that are regular in both.
    """
    if a.bin_mass is not None and b.bin_mass is not None:
        if a.bin_edges.shape != b.bin_edges.shape or not np.allclose(a.bin_edges, b.bin_edges, rtol=1e-12, atol=0):
            raise IncompatibleGridError("bin edges differ")
        diff = a.bin_mass - b.bin_mass
        tv = 0.5 * float(np.abs(diff[1:-1]).sum())
        ks = float(np.max(np.abs(np.cumsum(diff))))
        return tv, ks
    if a.mu_grid.shape != b.mu_grid.shape or not np.allclose(a.mu_grid, b.mu_grid, rtol=1e-12, atol=0):
        raise IncompatibleGridError("mu grids differ")
    ok = np.isfinite(a.density) & np.isfinite(b.density)
    for d in (a, b):
        if d.node_flags is not None:
            ok &= np.array([f in ("", "shoulder") for f in d.node_flags])
    m = a.mu_grid[ok]
    da, db = a.density[ok], b.density[ok]
    tv = 0.5 * float(trapezoid(np.abs(da - db), m))
    seg = lambda y: np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(m))])
    ks = float(np.max(np.abs(seg(da) - seg(db))))
    return tv, ks


def has_peak_near_max(density: CountDensity, fraction: float = 0.02) -> bool:
    """Whether the density has a local maximum within ``fraction * mu_max`` of ``mu_max``.

    Judged on the regular, finite nodes of the window: a maximum anywhere but
    at the window's left edge counts.
    """
    mu, rho = density.mu_grid, density.density
    ok = (mu >= (1 - fraction) * density.mu_max) & (mu < density.mu_max) & np.isfinite(rho)
    if density.node_flags is not None:
        ok &= np.array([f != "singular" for f in density.node_flags])
    y = rho[ok]
    if y.size < 3 or not np.any(y > 0):
        return False
    return int(np.argmax(y)) > 0 and y.max() > y[0]
