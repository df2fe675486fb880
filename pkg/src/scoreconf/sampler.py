"""Annealed Langevin dynamics with a denoising step and noise-tape replay.

Random streams
--------------
Every chain owns its generators, derived from the batch seed by
``SeedSequence(seed, spawn_key=(purpose, chain_id))`` with purpose 0 for
injected noise and 1 for initial points. At scale ``i`` the noise stream of
a chain emits one ``(T, D)`` block. Output row ``m`` therefore depends only
on ``(seed, chain_ids[m])`` and never on how many chains share the call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import DivergedChainError, InvalidInputError
from .oracle import ScoreField
from .schedule import LangevinConfig, NoiseSchedule

DIVERGENCE_THRESHOLD = 1e6
NOISE_STREAM = 0
INIT_STREAM = 1


def chain_generator(seed: int, chain_id: int, purpose: int = NOISE_STREAM) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(purpose, int(chain_id))))


def initial_points(M: int, D: int, seed: int = 0, kind: str = "uniform", chain_ids=None, scale: float = 1.0):
    """Chain initialisations: ``uniform`` on [0, 1]^D or ``gaussian`` N(0, scale^2 I)."""
    chain_ids = range(M) if chain_ids is None else chain_ids
    rows = []
    for k in chain_ids:
        g = chain_generator(seed, k, INIT_STREAM)
        if kind == "uniform":
            rows.append(g.random(D))
        elif kind == "gaussian":
            rows.append(scale * g.standard_normal(D))
        else:
            raise InvalidInputError(f"unknown initialisation {kind!r}")
    return np.array(rows, dtype=np.float64).reshape(len(rows), D)


@dataclass
class NoiseTape:
    """Every injected Gaussian vector, ``z[i, j, m]`` for scale i, step j, chain m."""

    z: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        if self.z.ndim != 4:
            raise InvalidInputError(f"noise tape must be (L, T, M, D), got shape {self.z.shape}")

    @property
    def shape(self):
        return self.z.shape

    def __len__(self):
        return self.z.shape[0] * self.z.shape[1]

    def chain(self, m: int) -> "NoiseTape":
        return NoiseTape(self.z[:, :, m:m + 1, :].copy())

    def save(self, path, **meta):
        L, T, M, D = self.z.shape
        return io.write_binary(path, self.z, kind="noise_tape", L=L, T=T, M=M, D=D, **meta)

    @classmethod
    def load(cls, path) -> "NoiseTape":
        z, _ = io.read_binary(path)
        return cls(z)


@dataclass
class SampleBatch:
    samples: np.ndarray
    schedule_id: str
    config: LangevinConfig
    seed: int
    denoised: bool
    chain_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.shape[0] < 1 or not np.all(np.isfinite(self.samples)):
            raise InvalidInputError("sample batch must be non-empty and finite")

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def D(self) -> int:
        return self.samples.shape[1]

    def metadata(self) -> dict:
        return {
            "kind": "sample_batch",
            "M": self.M,
            "D": self.D,
            "seed": self.seed,
            "schedule_id": self.schedule_id,
            "config": self.config.to_dict(),
            "denoised": self.denoised,
            "chain_ids": [int(c) for c in self.chain_ids],
        }

    def to_csv(self, path) -> Path:
        return io.write_csv(path, self.samples)

    def save(self, path):
        return io.write_binary(path, self.samples, **self.metadata())

    @classmethod
    def load(cls, path) -> "SampleBatch":
        samples, meta = io.read_binary(path)
        cfg = LangevinConfig(**meta["config"])
        return cls(samples, meta["schedule_id"], cfg, meta["seed"], meta["denoised"], meta.get("chain_ids", []))


def langevin_step(x, score, alpha, z):
    """One Langevin update ``x + alpha * score + sqrt(2 alpha) * z``."""
    if alpha <= 0:
        raise InvalidInputError(f"step size must be positive, got {alpha}")
    return x + alpha * score + math.sqrt(2.0 * alpha) * z


def denoise(x, field: ScoreField, sigma_last: float):
    """Tweedie correction ``x + sigma^2 * score(x, sigma)`` at the last scale."""
    if sigma_last <= 0:
        raise InvalidInputError(f"sigma_last must be positive, got {sigma_last}")
    return x + sigma_last * sigma_last * field.score(x, sigma_last)


def anneal_sample(
    field: ScoreField,
    schedule: NoiseSchedule,
    config: LangevinConfig,
    init,
    seed: int = 0,
    *,
    chain_ids=None,
    record_tape: bool = False,
    tape: NoiseTape | None = None,
    trace=None,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
):
    """Run annealed Langevin dynamics from ``init`` (an M x D matrix).

    Returns ``(SampleBatch, NoiseTape | None)``. Passing ``tape`` replays its
    noise instead of drawing fresh noise. ``trace(i, x)`` is called with the
    0-based scale index and the chains after the last step of that scale,
    before any denoising.
    """
    x = np.array(init, dtype=np.float64, ndmin=2)
    M, D = x.shape
    if D != schedule.D:
        raise InvalidInputError(f"init has dimension {D} but the schedule is for D={schedule.D}")
    chain_ids = list(range(M)) if chain_ids is None else [int(c) for c in chain_ids]
    if len(chain_ids) != M:
        raise InvalidInputError(f"{len(chain_ids)} chain ids for {M} chains")
    L, T = schedule.L, config.T
    if tape is not None and tape.shape != (L, T, M, D):
        raise InvalidInputError(f"tape shape {tape.shape} does not match (L, T, M, D) = {(L, T, M, D)}")

    rngs = None if tape is not None else [chain_generator(seed, k) for k in chain_ids]
    recorded = np.empty((L, T, M, D)) if record_tape else None
    alphas = schedule.step_sizes(config.epsilon)
    block = np.empty((T, M, D))

    for i in range(L):
        sigma, alpha = float(schedule.sigmas[i]), float(alphas[i])
        if tape is not None:
            block = tape.z[i]
        else:
            for m, g in enumerate(rngs):
                block[:, m, :] = g.standard_normal((T, D))
        if recorded is not None:
            recorded[i] = block
        for t in range(T):
            x = langevin_step(x, field.score(x, sigma), alpha, block[t])
            _check_finite(x, divergence_threshold, i, t, chain_ids)
        if trace is not None:
            trace(i, x)

    if config.denoise:
        x = denoise(x, field, schedule.sigmaL)
        _check_finite(x, divergence_threshold, L - 1, T - 1, chain_ids)
    batch = SampleBatch(x, schedule.schedule_id, config, seed, config.denoise, chain_ids)
    return batch, (NoiseTape(recorded) if recorded is not None else None)


def _check_finite(x, threshold, i, t, chain_ids):
    bad = ~np.all(np.isfinite(x) & (np.abs(x) <= threshold), axis=1)
    if bad.any():
        ids = [chain_ids[m] for m in np.flatnonzero(bad)]
        raise DivergedChainError(
            f"chains {ids[:10]} diverged at scale {i + 1}, step {t + 1} (|x| > {threshold:g} or non-finite)",
            scale=i + 1,
            step=t + 1,
            chains=ids,
        )


def mix_tapes(tape1: NoiseTape, tape2: NoiseTape, theta: float) -> NoiseTape:
    """``cos(theta) z1 + sin(theta) z2`` entrywise."""
    if tape1.shape != tape2.shape:
        raise InvalidInputError(f"tape shapes differ: {tape1.shape} vs {tape2.shape}")
    return NoiseTape(math.cos(theta) * tape1.z + math.sin(theta) * tape2.z)


def interpolation_angles(K: int) -> np.ndarray:
    """Interior angles ``k pi / (2 (K + 1))`` for k = 1..K."""
    return np.arange(1, K + 1) * math.pi / (2 * (K + 1))


def replay(field, schedule, config, init, tape: NoiseTape, seed: int = 0) -> SampleBatch:
    batch, _ = anneal_sample(field, schedule, config, init, seed, tape=tape)
    return batch


def interpolate(field, schedule, config, init, tape1: NoiseTape, tape2: NoiseTape, K: int, *, include_endpoints=False, seed: int = 0) -> SampleBatch:
    """Samples between two single-chain runs sharing ``init``, by mixing their noise.

    The K rows use the strictly interior angles. With ``include_endpoints``
    the two originals are replayed from their own unmixed tapes and placed
    first and last, so they are reproduced exactly.
    """
    if K < 1:
        raise InvalidInputError(f"K must be positive, got {K}")
    if tape1.shape != tape2.shape:
        raise InvalidInputError(f"tape shapes differ: {tape1.shape} vs {tape2.shape}")
    L, T, M, D = tape1.shape
    if M != 1:
        raise InvalidInputError(f"interpolation tapes must hold a single chain, got {M}")
    x0 = np.asarray(init, dtype=np.float64).reshape(1, D)

    mixed = np.concatenate([mix_tapes(tape1, tape2, th).z for th in interpolation_angles(K)], axis=2)
    interior = replay(field, schedule, config, np.repeat(x0, K, axis=0), NoiseTape(mixed), seed)
    rows = interior.samples
    if include_endpoints:
        first = replay(field, schedule, config, x0, tape1, seed).samples
        last = replay(field, schedule, config, x0, tape2, seed).samples
        rows = np.concatenate([first, rows, last])
    return SampleBatch(rows, schedule.schedule_id, config, seed, config.denoise, list(range(rows.shape[0])))
