"""Chi-squared ensemble of cavity escape rates.

Over an ensemble of chaotic modes the escape rate ``Gamma = sum_p |gamma_p|^2``
is a sum of ``nu = beta * M`` squared Gaussian amplitudes, i.e.

    P(Gamma) = A_nu Gamma**(nu/2 - 1) exp(-nu Gamma / (2 Gamma_bar)),
    A_nu = (nu / (2 Gamma_bar))**(nu/2) / Gamma_fn(nu/2).

``beta = M = 1`` is the Porter-Thomas distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincc, gammaln

#: Largest degrees of freedom for the exact sum-of-squared-normals sampler.
SUM_OF_SQUARES_MAX_NU = 32


@dataclass(frozen=True)
class ModeEnsemble:
    beta: int
    channels_M: int
    mean_gamma: float

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise ValueError(f"beta must be 1 or 2, got {self.beta!r}")
        if int(self.channels_M) != self.channels_M or self.channels_M < 1:
            raise ValueError(f"channels_M must be a positive integer, got {self.channels_M!r}")
        if not (math.isfinite(self.mean_gamma) and self.mean_gamma > 0):
            raise ValueError(f"mean_gamma must be > 0, got {self.mean_gamma!r}")

    @property
    def nu(self) -> int:
        return int(self.beta * self.channels_M)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "channels_M": int(self.channels_M), "mean_gamma": self.mean_gamma}


@dataclass(frozen=True)
class RngHandle:
    """Reproducible random stream: identical ``(seed, stream)`` gives identical draws."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream < 0:
            raise ValueError("stream id must be >= 0")

    def generator(self, substream: int = 0) -> np.random.Generator:
        # Philox is counter-based; spawn keys give independent, addressable streams
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, substream))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream: int) -> "RngHandle":
        return RngHandle(self.seed, stream)


def _log_norm(ensemble: ModeEnsemble) -> float:
    half = 0.5 * ensemble.nu
    return half * math.log(half / ensemble.mean_gamma) - gammaln(half)


def gamma_pdf(ensemble: ModeEnsemble, gamma):
    """Density of the escape rate; accepts scalars or arrays."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("escape rate must be >= 0")
    half = 0.5 * ensemble.nu
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = _log_norm(ensemble) + (half - 1.0) * np.log(g) - half * g / ensemble.mean_gamma
        out = np.exp(logp)
    if half == 1.0:
        # 0 * log(0) above is nan
        out = np.where(g == 0, math.exp(_log_norm(ensemble)), out)
    return out if out.ndim else float(out)


def gamma_cdf(ensemble: ModeEnsemble, gamma):
    g = np.asarray(gamma, dtype=float)
    half = 0.5 * ensemble.nu
    out = gammainc(half, half * np.maximum(g, 0.0) / ensemble.mean_gamma)
    return out if out.ndim else float(out)


def gamma_sf(ensemble: ModeEnsemble, gamma):
    """Upper tail ``P(Gamma' > gamma)``, accurate where the CDF rounds to 1."""
    g = np.asarray(gamma, dtype=float)
    half = 0.5 * ensemble.nu
    out = gammaincc(half, half * np.maximum(g, 0.0) / ensemble.mean_gamma)
    return out if out.ndim else float(out)


def sample_gamma(ensemble: ModeEnsemble, rng: RngHandle, count: int, substream: int = 0) -> np.ndarray:
    """Draw ``count`` i.i.d. escape rates.

    For ``nu <= 32`` each draw is ``(Gamma_bar / nu) * sum_k z_k**2`` with
    standard normal ``z_k``; above that numpy's gamma variate (Marsaglia-Tsang
    rejection) is used.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    gen = rng.generator(substream)
    nu = ensemble.nu
    if nu <= SUM_OF_SQUARES_MAX_NU:
        z = gen.standard_normal((count, nu))
        return (ensemble.mean_gamma / nu) * np.einsum("ij,ij->i", z, z)
    return gen.gamma(0.5 * nu, 2.0 * ensemble.mean_gamma / nu, size=count)


def gaussian_limit_stats(ensemble: ModeEnsemble) -> tuple[float, float]:
    """Mean and standard deviation of the large-M Gaussian limit."""
    return ensemble.mean_gamma, ensemble.mean_gamma / math.sqrt(0.5 * ensemble.nu)
