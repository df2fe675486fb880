"""Experiment drivers shared by the CLI, the scripts and the acceptance suite."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _blocked
from .config import DataConfig, ExperimentConfig
from .data import Dataset, gen_gaussian_mixture_2d, load_cifar10, load_matrix, mixture_labels
from .errors import ConfigError, FormatError
from .net import MlpScoreNet, TrainConfig, TrainResult, train
from .oracle import GaussianMixtureOracle
from .sampler import anneal_sample, initial_points
from .schedule import (
    LangevinConfig,
    NoiseSchedule,
    build_schedule,
    distance_summary,
    geometric_schedule,
    max_pairwise_distance,
    solve_epsilon,
)

CIFAR_ENV = "CIFAR10_DIR"


def cifar_dir(path=None) -> Path | None:
    """Explicit path, else ``$CIFAR10_DIR``, else None."""
    p = path or os.environ.get(CIFAR_ENV)
    return Path(p) if p else None


def load_dataset(cfg: DataConfig) -> Dataset:
    if cfg.kind == "cifar10":
        d = cifar_dir(cfg.path)
        if d is None:
            raise FormatError(f"CIFAR-10 requested but neither data.path nor ${CIFAR_ENV} is set")
        return load_cifar10(d, cfg.split)
    if cfg.kind == "mixture":
        return gen_gaussian_mixture_2d(cfg.centers, cfg.weights, cfg.component_sigma, cfg.n, cfg.seed)
    if cfg.kind == "gaussian":
        mean = np.asarray(cfg.mean, dtype=np.float64)
        x = mean + cfg.std * np.random.default_rng(cfg.seed).standard_normal((cfg.n, mean.size))
        return Dataset(x, name="gaussian")
    if cfg.path is None:
        raise ConfigError("data.kind 'file' needs data.path")
    return load_matrix(cfg.path)


def resolve_schedule(cfg: ExperimentConfig, data: Dataset | None = None) -> tuple[NoiseSchedule, LangevinConfig, dict]:
    """Schedule and Langevin settings from the config, measuring sigma1 on data when asked."""
    s = cfg.schedule
    info = {}
    sigma1 = s.sigma1
    if sigma1 == "from-data":
        if data is None:
            raise ConfigError("schedule.sigma1 is 'from-data' but no dataset was loaded")
        sigma1 = max_pairwise_distance(data.x, s.subsample, cfg.seed)
        info["sigma1_source"] = "max_pairwise_distance"
    D = s.D or (data.D if data is not None else None)
    if D is None:
        raise ConfigError("schedule.D is required when no dataset is given")
    sigma1 = float(sigma1)
    if s.L is None:
        schedule = build_schedule(sigma1, s.sigmaL, D, s.target_C)
    else:
        schedule = geometric_schedule(sigma1, s.sigmaL, s.L, D)
    smp = cfg.sampler
    if smp.epsilon == "solve":
        lcfg = solve_epsilon(schedule, smp.T, denoise=smp.denoise)
    else:
        lcfg = LangevinConfig(float(smp.epsilon), smp.T, smp.denoise)
    return schedule, lcfg, info


# -- point-mass mixture over a dataset -------------------------------------------


def mixture_distance_experiment(data, runs, n_chains: int = 100, seed: int = 0, baseline_subsample: int = 10_000, log=None) -> dict:
    """Annealed sampling with the exact score of the empirical distribution.

    For every run (``sigma1``, ``sigmaL``, ``T``, ``epsilon``, optional ``L``)
    chains start uniform on [0, 1]^D, and the mean pairwise distance of the
    denoised samples is reported next to the same statistic on the data.
    """
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    D = x.shape[1]
    oracle = GaussianMixtureOracle(x)
    baseline = distance_summary(x, baseline_subsample, seed)
    rows = [{"name": "data", "mean_pairwise": baseline["mean"], "n_points": baseline["n_points"]}]
    init = initial_points(n_chains, D, seed=seed)
    for run in runs:
        if run.get("L"):
            schedule = geometric_schedule(run["sigma1"], run["sigmaL"], run["L"], D)
        else:
            schedule = build_schedule(run["sigma1"], run["sigmaL"], D)
        if run["epsilon"] == "solve":
            lcfg = solve_epsilon(schedule, run["T"])
        else:
            lcfg = LangevinConfig(float(run["epsilon"]), run["T"])
        if log:
            log(f"{run['name']}: L={schedule.L} gamma={schedule.gamma:.6f} T={lcfg.T} eps={lcfg.epsilon:.3e}")
        batch, _ = anneal_sample(oracle, schedule, lcfg, init, seed=seed)
        stats = distance_summary(batch.samples, n_chains, seed)
        nearest = np.sqrt(np.min(_blocked.sq_dists(batch.samples, x, _blocked.sq_norms(batch.samples), _blocked.sq_norms(x)), axis=1))
        rows.append({
            "name": run["name"], "sigma1": run["sigma1"], "sigmaL": run["sigmaL"], "L": schedule.L,
            "T": lcfg.T, "epsilon": lcfg.epsilon, "mean_pairwise": stats["mean"],
            "median_nearest_data": float(np.median(nearest)),
        })
    return {"D": D, "N": x.shape[0], "n_chains": n_chains, "seed": seed, "rows": rows}


# -- learned scores in two dimensions --------------------------------------------

# An unconditional 2-D net cannot infer sigma from ||x - mu|| the way a
# high-dimensional one can, so the trained schedules stay narrow.
GAUSSIAN_MEAN = (1.0, -0.5)
GAUSSIAN_STD = 1.0
GAUSSIAN_SCHEDULE = (1.5, 0.7, 10)
MIXTURE_CENTERS = ((-2.0, 0.0), (2.0, 0.0))
MIXTURE_STD = 0.3
MIXTURE_SCHEDULE = (4.0, 0.1, 10)


def relative_score_error(field, mean, std: float, sigma: float, n: int = 20_000, seed: int = 0) -> float:
    """``sqrt(E||s_hat - s||^2 / E||s||^2)`` over ``x ~ N(mean, (std^2 + sigma^2) I)``."""
    mean = np.asarray(mean, dtype=np.float64)
    var = std * std + sigma * sigma
    x = mean + math.sqrt(var) * np.random.default_rng(seed).standard_normal((n, mean.size))
    true = -(x - mean) / var
    est = field.score(x, sigma)
    return float(math.sqrt(np.sum((est - true) ** 2) / np.sum(true**2)))


@dataclass
class LearnedScoreReport:
    result: TrainResult
    schedule: NoiseSchedule
    probe_sigmas: np.ndarray
    errors_raw: np.ndarray
    errors_ema: np.ndarray


def gaussian_score_experiment(iterations: int = 20_000, H: int = 128, seed: int = 0, n_data: int = 20_000, n_probe: int = 5, config: TrainConfig = TrainConfig()) -> LearnedScoreReport:
    mean = np.asarray(GAUSSIAN_MEAN)
    data = mean + GAUSSIAN_STD * np.random.default_rng(seed).standard_normal((n_data, mean.size))
    s1, sL, L = GAUSSIAN_SCHEDULE
    schedule = geometric_schedule(s1, sL, L, mean.size)
    res = train(MlpScoreNet.init(mean.size, H, 2, seed=seed), data, schedule, config, iterations, seed=seed + 1)
    probes = np.geomspace(s1, sL, n_probe)
    ema = res.ema.as_net(res.net.activation)
    raw_err = np.array([relative_score_error(res.net, mean, GAUSSIAN_STD, s, seed=seed + 5) for s in probes])
    ema_err = np.array([relative_score_error(ema, mean, GAUSSIAN_STD, s, seed=seed + 5) for s in probes])
    return LearnedScoreReport(res, schedule, probes, raw_err, ema_err)


@dataclass
class ModeReport:
    result: TrainResult
    schedule: NoiseSchedule
    config: LangevinConfig
    samples: np.ndarray
    occupancy: np.ndarray


def mixture_mode_experiment(iterations: int = 20_000, H: int = 128, seed: int = 0, n_data: int = 20_000, n_samples: int = 1000, T: int = 100, config: TrainConfig = TrainConfig()) -> ModeReport:
    centers = np.asarray(MIXTURE_CENTERS)
    data = gen_gaussian_mixture_2d(centers, None, MIXTURE_STD, n_data, seed)
    s1, sL, L = MIXTURE_SCHEDULE
    schedule = geometric_schedule(s1, sL, L, 2)
    res = train(MlpScoreNet.init(2, H, 2, seed=seed), data.x, schedule, config, iterations, seed=seed + 1)
    lcfg = solve_epsilon(schedule, T)
    batch, _ = anneal_sample(res.ema.as_net(res.net.activation), schedule, lcfg, initial_points(n_samples, 2, seed=seed + 3), seed=seed + 4)
    occ = np.bincount(mixture_labels(batch.samples, centers), minlength=len(centers)) / n_samples
    return ModeReport(res, schedule, lcfg, batch.samples, occ)
