"""Randomized verifier batteries for the three analytic results the package relies on.

Each battery returns a list of check records (plain dicts, JSON-ready) with
a boolean ``passed`` field. Configurations are drawn from a seeded
generator so a battery is a deterministic function of its seed.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .oracle import GaussianMixtureOracle, empirical_responsibility_mean, prop1_bound
from .schedule import geometric_schedule, langevin_variance_ratio
from .theory import (
    RadialLaw,
    ks_against_gaussian,
    ks_statistic_by_dimension,
    per_scale_variance_ratios,
    radial_pdf_integral,
    sample_radii,
    verify_prop3,
)

SUITES = ("prop1", "prop2", "prop3")


def responsibility_battery(n_configs: int = 50, dims=(2, 16, 256), max_separation: float = 10.0, n_samples: int = 20_000, seed: int = 0, n_se: float = 3.0):
    """Two-point mixtures at separations up to ``max_separation * sigma1``.

    The MC mean of the foreign responsibility must not exceed the closed-form
    bound by more than ``n_se`` standard errors.
    """
    rng = np.random.default_rng(seed)
    checks = []
    for k in range(n_configs):
        D = int(dims[k % len(dims)])
        sigma1 = float(10 ** rng.uniform(-1, 1))
        sep = float(rng.uniform(0, max_separation)) * sigma1
        direction = rng.standard_normal(D)
        direction /= np.linalg.norm(direction)
        xi = rng.normal(size=D)
        xj = xi + sep * direction
        oracle = GaussianMixtureOracle(np.stack([xi, xj]))
        mean, se = empirical_responsibility_mean(oracle, 0, 1, sigma1, n_samples=n_samples, seed=seed * 1000 + k)
        bound = prop1_bound(xi, xj, sigma1)
        checks.append({
            "suite": "prop1", "name": f"pair{k}", "D": D, "sigma1": sigma1, "separation": sep,
            "mc_mean": float(mean), "std_error": float(se), "bound": bound,
            "passed": bool(mean <= bound + n_se * se),
        })
    tiny = prop1_bound(np.zeros(1), np.array([18.0]), 1.0)
    checks.append({"suite": "prop1", "name": "distance18_sigma1", "bound": tiny, "passed": bool(tiny < 1e-17)})
    return checks


def radial_battery(dims_integral=(2, 10, 3072), ks_dims=(8, 64, 512, 3072), n_ks: int = 10_000, alpha: float = 0.01, seed: int = 0):
    """Radial density normalisation, high-D normal approximation, and its improvement with D."""
    checks = []
    for D in dims_integral:
        val = radial_pdf_integral(RadialLaw(int(D), 1.0))
        checks.append({"suite": "prop2", "name": f"integral_D{D}", "value": val, "passed": bool(abs(val - 1) < 1e-8)})
    law = RadialLaw(3072, 50.0)
    stat, p = ks_against_gaussian(sample_radii(law, n_ks, seed), law)
    checks.append({"suite": "prop2", "name": "ks_D3072", "statistic": stat, "p_value": p, "passed": bool(p > alpha)})
    ks = ks_statistic_by_dimension(ks_dims, n=100_000, seed=seed)
    vals = [ks[int(d)] for d in ks_dims]
    checks.append({
        "suite": "prop2", "name": "ks_monotone", "statistics": {str(d): v for d, v in ks.items()},
        "passed": bool(all(a > b for a, b in zip(vals, vals[1:]))),
    })
    return checks


def variance_battery(n_configs: int = 20, n_chains: int = 2000, seed: int = 0, max_z: float = 4.0):
    """Simulated single-point Langevin variance against the closed form, plus invariance checks."""
    rng = np.random.default_rng(seed)
    checks = []
    for k in range(n_configs):
        gamma = float(rng.uniform(1.01, 1.6))
        sigmaL = float(10 ** rng.uniform(-2, 0))
        sigma_i = sigmaL * float(10 ** rng.uniform(0, 2))
        eps = float(rng.uniform(0.01, 0.9)) * sigmaL**2
        T = int(rng.choice([1, 3, 5, 20, 100]))
        D = int(rng.choice([2, 16, 64, 256]))
        res = verify_prop3(gamma * sigma_i, sigma_i, eps, sigmaL, T, D, n_chains=n_chains, seed=seed * 1000 + k)
        checks.append({
            "suite": "prop3", "name": f"config{k}", "gamma": gamma, "sigma_i": sigma_i, "sigmaL": sigmaL,
            "epsilon": eps, "T": T, "D": D, "empirical": res.empirical_ratio, "closed_form": res.closed_form_ratio,
            "z": res.z_score, "passed": bool(abs(res.z_score) <= max_z),
        })
    gamma = geometric_schedule(50.0, 0.01, 219, 2).gamma
    ref = langevin_variance_ratio(gamma, 6e-6, 0.01, 5)
    dev = max(
        float(np.max(np.abs(per_scale_variance_ratios(geometric_schedule(50.0, 0.01, 219, D), 6e-6, 5) / ref - 1)))
        for D in (2, 3072)
    )
    checks.append({"suite": "prop3", "name": "scale_and_dimension_invariance", "max_rel_dev": dev, "passed": bool(dev <= 1e-12)})
    return checks


def run_suites(suites=SUITES, seed: int = 0) -> dict:
    runners = {"prop1": responsibility_battery, "prop2": radial_battery, "prop3": variance_battery}
    checks = []
    for name in suites:
        if name not in runners:
            raise InvalidInputError(f"unknown suite {name!r}; choose from {SUITES}")
        checks += runners[name](seed=seed)
    failed = [c["name"] for c in checks if not c["passed"]]
    return {"suites": list(suites), "seed": seed, "n_checks": len(checks), "n_failed": len(failed), "failed": failed, "passed": not failed, "checks": checks}
