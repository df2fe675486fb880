"""Analytic evaluators and Monte-Carlo checks for the radial law of an
isotropic Gaussian, the score-norm heuristic, and the Langevin variance
recursion on a single-point dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln, xlogy

from .errors import DivergedChainError, DivergentRegimeError, InvalidInputError
from .schedule import LangevinConfig, NoiseSchedule, langevin_variance_ratio


@dataclass(frozen=True)
class RadialLaw:
    """Law of ``||x||`` for ``x ~ N(0, sigma^2 I_D)``."""

    D: int
    sigma: float

    def __post_init__(self):
        if self.D < 1 or not self.sigma > 0:
            raise InvalidInputError(f"need D >= 1 and sigma > 0, got D={self.D}, sigma={self.sigma}")


def radial_logpdf(r, law: RadialLaw):
    r = np.asarray(r, dtype=np.float64)
    D, s = law.D, law.sigma
    out = (
        xlogy(D - 1, r)
        - D * math.log(s)
        - r * r / (2 * s * s)
        - (D / 2 - 1) * math.log(2)
        - gammaln(D / 2)
    )
    return np.where(r < 0, -np.inf, out)


def radial_pdf(r, law: RadialLaw):
    return np.exp(radial_logpdf(r, law))


def radial_mode(law: RadialLaw) -> float:
    return math.sqrt(max(law.D - 1, 0)) * law.sigma


def radial_pdf_integral(law: RadialLaw) -> float:
    """Adaptive quadrature of the radial density over [0, sqrt(D) sigma + 12 sigma]."""
    upper = math.sqrt(law.D) * law.sigma + 12 * law.sigma
    mode = radial_mode(law)
    points = [mode] if 0 < mode < upper else None
    val, _ = integrate.quad(lambda r: float(radial_pdf(r, law)), 0.0, upper, points=points, limit=500, epsabs=1e-13, epsrel=1e-12)
    return val


def radial_gaussian_approx(law: RadialLaw) -> tuple[float, float]:
    """Large-D normal approximation: mean ``sqrt(D) sigma``, variance ``sigma^2 / 2``."""
    return math.sqrt(law.D) * law.sigma, law.sigma**2 / 2


def sample_radii(law: RadialLaw, n: int, seed: int = 0, chunk_elems: int = 2**22) -> np.ndarray:
    """Norms of ``n`` exact draws of ``N(0, sigma^2 I_D)``."""
    rng = np.random.default_rng(seed)
    rows = max(1, chunk_elems // law.D)
    out = np.empty(n)
    for start in range(0, n, rows):
        m = min(rows, n - start)
        out[start:start + m] = np.linalg.norm(rng.standard_normal((m, law.D)), axis=1)
    return law.sigma * out


def radial_quantiles(law: RadialLaw, u) -> np.ndarray:
    """Inverse CDF of the radial law (exact: ``sigma * sqrt(chi2_D quantile)``)."""
    return law.sigma * np.sqrt(stats.chi2.ppf(u, law.D))


def ks_against_gaussian(radii, law: RadialLaw):
    """One-sample two-sided KS test of ``radii`` against the normal approximation."""
    mean, var = radial_gaussian_approx(law)
    res = stats.kstest(radii, stats.norm(loc=mean, scale=math.sqrt(var)).cdf)
    return float(res.statistic), float(res.pvalue)


def ks_statistic_by_dimension(dims, sigma: float = 1.0, n: int = 100_000, seed: int = 0) -> dict:
    """KS distance to the normal approximation for several D at matched n.

    All dimensions share one set of uniforms pushed through each exact
    radial quantile function, so sampling noise is common across D and the
    differences reflect the approximation error.
    """
    u = np.random.default_rng(seed).random(n)
    return {int(D): ks_against_gaussian(radial_quantiles(RadialLaw(int(D), sigma), u), RadialLaw(int(D), sigma))[0] for D in dims}


def expected_score_norm(D: int, sigma: float) -> float:
    """Heuristic ``E||grad log p_sigma(x)|| ~ sqrt(D) / sigma`` for ``N(0, sigma^2 I)``."""
    if D < 1 or not sigma > 0:
        raise InvalidInputError(f"need D >= 1 and sigma > 0, got D={D}, sigma={sigma}")
    return math.sqrt(D) / sigma


def exact_score_norm(D: int, sigma: float) -> float:
    """``E||x / sigma^2||`` exactly: ``sqrt(2) Gamma((D+1)/2) / Gamma(D/2) / sigma``."""
    return math.exp(0.5 * math.log(2) + gammaln((D + 1) / 2) - gammaln(D / 2)) / sigma


def mc_score_norm(D: int, sigma: float, n: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo mean of ``||x / sigma^2||`` over ``x ~ N(0, sigma^2 I)`` with its standard error."""
    norms = sample_radii(RadialLaw(D, sigma), n, seed) / sigma**2
    return float(norms.mean()), float(norms.std(ddof=1) / math.sqrt(n))


@dataclass(frozen=True)
class VarianceCheck:
    empirical_ratio: float
    closed_form_ratio: float
    z_score: float
    std_error: float


def verify_prop3(sigma_prev, sigma_i, epsilon, sigmaL, T, D, n_chains=10_000, seed=0, divergence_threshold=1e6) -> VarianceCheck:
    """Simulate T Langevin steps at scale sigma_i from ``N(0, sigma_prev^2 I)`` and compare.

    The empirical variance pools every coordinate of every chain (the mean
    is known to be zero), so its standard error under the Gaussian law is
    ``s_T^2 sqrt(2 / (n_chains D))``.
    """
    if not 0 < epsilon < sigmaL**2:
        raise DivergentRegimeError(f"need 0 < epsilon < sigmaL^2, got {epsilon}")
    if n_chains < 100:
        raise InvalidInputError(f"n_chains must be at least 100, got {n_chains}")
    rng = np.random.default_rng(seed)
    alpha = epsilon * sigma_i**2 / sigmaL**2
    x = sigma_prev * rng.standard_normal((n_chains, D))
    noise_scale = math.sqrt(2 * alpha)
    for t in range(T):
        x = x - alpha * x / sigma_i**2 + noise_scale * rng.standard_normal((n_chains, D))
        if not np.all(np.isfinite(x)) or np.abs(x).max() > divergence_threshold:
            raise DivergedChainError(f"variance check diverged at step {t + 1}", step=t + 1)
    empirical = float(np.mean(x * x)) / sigma_i**2
    closed = langevin_variance_ratio(sigma_prev / sigma_i, epsilon, sigmaL, T)
    se = closed * math.sqrt(2.0 / (n_chains * D))
    return VarianceCheck(empirical, closed, (empirical - closed) / se, se)


def per_scale_variance_ratios(schedule: NoiseSchedule, epsilon: float, T: int) -> np.ndarray:
    """Closed-form ``s_T^2 / sigma_i^2`` for scales 2..L, using each realised ratio ``sigma_{i-1}/sigma_i``."""
    g = schedule.sigmas[:-1] / schedule.sigmas[1:]
    return np.array([langevin_variance_ratio(float(gi), epsilon, schedule.sigmaL, T) for gi in g])


def moment_trajectory(schedule: NoiseSchedule, config: LangevinConfig, init_mean, init_var, data_mean=0.0, data_var=0.0):
    """Per-coordinate mean and variance of annealed Langevin chains after each scale.

    Exact for Gaussian data ``N(data_mean, data_var I)`` with its exact score
    ``-(x - data_mean) / (data_var + sigma^2)`` and Gaussian (or, through the
    first two moments, any) initialisation. With ``data_var = 0`` each scale
    reproduces the closed-form single-point recursion.
    Returns two arrays of length L.
    """
    alphas = schedule.step_sizes(config.epsilon)
    m = init_mean - data_mean
    v = init_var
    means, variances = [], []
    for sigma, alpha in zip(schedule.sigmas, alphas):
        tau2 = data_var + sigma * sigma
        rho = 1.0 - alpha / tau2
        fixed = 2.0 * alpha / (1.0 - rho * rho)
        m = rho**config.T * m
        v = rho ** (2 * config.T) * (v - fixed) + fixed
        means.append(m + data_mean)
        variances.append(v)
    return np.array(means), np.array(variances)
