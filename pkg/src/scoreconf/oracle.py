"""Exact scores of isotropic Gaussians and equal-weight Gaussian mixtures.

A mixture with ``base_sigma = 0`` is the empirical point-mass distribution
of a dataset; perturbing it with ``N(0, sigma^2 I)`` gives components of
variance exactly ``sigma^2``. All responsibility arithmetic happens in log
space, which keeps image-scale separations (distance ~18, sigma ~0.01)
from underflowing.
"""

from __future__ import annotations

import math
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.special import logsumexp

from . import _blocked
from .errors import DegenerateDistributionError, InvalidInputError

# below this many M*N*D multiply-adds, distances use direct differencing
_DIRECT_LIMIT = 4_000_000


@runtime_checkable
class ScoreField(Protocol):
    """Anything mapping ``(x, sigma)`` to a score of the same shape as ``x``.

    ``x`` may be a single D-vector or an (M, D) batch.
    """

    dims: int

    def score(self, x: np.ndarray, sigma: float) -> np.ndarray: ...


def gaussian_score(x, mu, s2, sigma):
    """Score of ``N(mu, (s2 + sigma^2) I)`` at ``x``."""
    var = s2 + sigma * sigma
    if s2 < 0 or sigma < 0 or var <= 0:
        raise DegenerateDistributionError(f"component variance must be positive, got s2={s2}, sigma={sigma}")
    return -(np.asarray(x, dtype=np.float64) - mu) / var


def gaussian_log_density(x, mu, var):
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    return -0.5 * np.sum((x - mu) ** 2, axis=-1) / var - 0.5 * d * math.log(2 * math.pi * var)


class GaussianMixtureOracle:
    """Equal-weight mixture of ``N(center_k, base_sigma^2 I)`` components.

    Immutable after construction and safe to share between sampler chains.
    """

    def __init__(self, centers, base_sigma: float = 0.0):
        centers = np.array(centers, dtype=np.float64)
        if centers.ndim == 1:
            centers = centers[None, :]
        if centers.ndim != 2 or centers.shape[0] < 1:
            raise InvalidInputError("centers must be a non-empty N x D matrix")
        if not np.all(np.isfinite(centers)):
            raise InvalidInputError("centers must be finite")
        if base_sigma < 0:
            raise InvalidInputError(f"base_sigma must be non-negative, got {base_sigma}")
        centers.setflags(write=False)
        self.centers = centers
        self.base_sigma = float(base_sigma)
        self._center_sq = _blocked.sq_norms(centers)
        self._center_sq.setflags(write=False)

    @property
    def n_components(self) -> int:
        return self.centers.shape[0]

    @property
    def dims(self) -> int:
        return self.centers.shape[1]

    def variance(self, sigma: float) -> float:
        var = self.base_sigma**2 + sigma * sigma
        if var <= 0:
            raise DegenerateDistributionError("perturbed component variance is zero")
        return var

    def _sq_dists(self, x):
        if x.shape[0] * self.centers.size <= _DIRECT_LIMIT:
            diff = x[:, None, :] - self.centers[None, :, :]
            return np.einsum("mnd,mnd->mn", diff, diff)
        return _blocked.sq_dists(x, self.centers, b_sq=self._center_sq)

    def component_log_densities(self, x, sigma: float) -> np.ndarray:
        """``log N(x | center_k, var I)`` for every row of ``x`` and every k, shape (M, N)."""
        x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
        var = self.variance(sigma)
        return -0.5 * self._sq_dists(x2) / var - 0.5 * self.dims * math.log(2 * math.pi * var)

    def log_density(self, x, sigma: float):
        x = np.asarray(x, dtype=np.float64)
        out = logsumexp(self.component_log_densities(x, sigma), axis=1) - math.log(self.n_components)
        return out[0] if x.ndim == 1 else out

    def responsibilities(self, x, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        logp = self.component_log_densities(x, sigma)
        logp -= logp.max(axis=1, keepdims=True)
        r = np.exp(logp)
        r /= r.sum(axis=1, keepdims=True)
        return r[0] if x.ndim == 1 else r

    def score(self, x, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        x2 = np.atleast_2d(x)
        r = self.responsibilities(x2, sigma)
        # sum_k r_k * (center_k - x) / var, using sum_k r_k = 1
        out = (r @ self.centers - x2) / self.variance(sigma)
        return out[0] if x.ndim == 1 else out


def point_mass(center) -> GaussianMixtureOracle:
    return GaussianMixtureOracle(np.asarray(center, dtype=np.float64)[None, :], base_sigma=0.0)


class ZeroField:
    """Score field that is identically zero."""

    def __init__(self, dims: int):
        self.dims = dims

    def score(self, x, sigma):
        return np.zeros_like(np.asarray(x, dtype=np.float64))


def responsibilities(x, oracle: GaussianMixtureOracle, sigma: float) -> np.ndarray:
    return oracle.responsibilities(x, sigma)


def mixture_score(x, oracle: GaussianMixtureOracle, sigma: float) -> np.ndarray:
    return oracle.score(x, sigma)


def prop1_bound(xi, xj, sigma1: float) -> float:
    """Upper bound ``0.5 * exp(-||xi - xj||^2 / (8 sigma1^2))`` on ``E_{p_i}[r_j]``."""
    if sigma1 <= 0:
        raise InvalidInputError(f"sigma1 must be positive, got {sigma1}")
    d2 = float(np.sum((np.asarray(xi, dtype=np.float64) - np.asarray(xj, dtype=np.float64)) ** 2))
    return 0.5 * math.exp(-d2 / (8.0 * sigma1 * sigma1))


def empirical_responsibility_mean(
    oracle: GaussianMixtureOracle,
    i: int,
    j: int,
    sigma1: float,
    n_samples: int = 100_000,
    seed: int = 0,
    chunk: int = 20_000,
):
    """Monte-Carlo estimate of ``E_{x ~ p_i}[r_j(x)]`` and its standard error.

    ``p_i`` is component ``i`` of ``oracle`` perturbed by ``sigma1``.
    """
    if i == j:
        raise InvalidInputError("the responsibility bound needs two distinct components")
    n = oracle.n_components
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidInputError(f"component indices must be in [0, {n}), got {i}, {j}")
    if n_samples < 100:
        raise InvalidInputError(f"n_samples must be at least 100, got {n_samples}")
    rng = np.random.default_rng(seed)
    scale = math.sqrt(oracle.variance(sigma1))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        x = oracle.centers[i] + scale * rng.standard_normal((m, oracle.dims))
        rj = oracle.responsibilities(x, sigma1)[:, j]
        total += rj.sum()
        total_sq += np.dot(rj, rj)
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)
