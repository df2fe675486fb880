"""Datasets: synthetic Gaussian mixtures, the CIFAR-10 binary batches, and distance statistics.

CIFAR-10 binary records are 3073 bytes: one label byte followed by 3072
pixel bytes laid out as the R, G and B 32x32 planes in row-major order.
Pixels are scaled by 1/255 into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import FormatError, InvalidInputError
from .schedule import DEFAULT_SUBSAMPLE, distance_summary

CIFAR_RECORD = 3073
CIFAR_D = 3072
CIFAR_TRAIN_FILES = tuple(f"data_batch_{k}.bin" for k in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    name: str = "data"
    value_range: tuple | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if not np.all(np.isfinite(x)):
            raise InvalidInputError(f"dataset {self.name!r} has non-finite entries")
        if self.value_range is not None:
            lo, hi = self.value_range
            if x.size and (x.min() < lo or x.max() > hi):
                raise InvalidInputError(f"dataset {self.name!r} leaves its range [{lo}, {hi}]")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def D(self) -> int:
        return self.x.shape[1]


def gen_gaussian_mixture_2d(centers, weights=None, component_sigma: float = 0.0, n: int = 1000, seed: int = 0) -> Dataset:
    """``n`` draws from ``sum_k w_k N(c_k, component_sigma^2 I)``.

    Component labels come first from the generator, then the Gaussian noise.
    Works for any dimension despite the name; 2-D is the intended use.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    K = centers.shape[0]
    w = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (K,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidInputError(f"weights must be {K} nonnegative numbers summing to 1")
    if component_sigma < 0:
        raise InvalidInputError(f"component_sigma must be >= 0, got {component_sigma}")
    rng = np.random.default_rng(seed)
    labels = rng.choice(K, size=n, p=w)
    x = centers[labels] + component_sigma * rng.standard_normal((n, centers.shape[1]))
    return Dataset(x, name=f"mixture{K}")


def mixture_labels(x, centers) -> np.ndarray:
    """Index of the nearest center for every row."""
    x = np.atleast_2d(x)
    centers = np.atleast_2d(centers)
    return np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)


def read_cifar10_batch(path) -> tuple[np.ndarray, np.ndarray]:
    """Pixels (N x 3072 in [0, 1]) and labels of one binary batch file."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing CIFAR-10 batch {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % CIFAR_RECORD:
        raise FormatError(f"{path}: size {raw.size} is not a positive multiple of {CIFAR_RECORD}")
    rec = raw.reshape(-1, CIFAR_RECORD)
    return rec[:, 1:] / 255.0, rec[:, 0].copy()


def write_cifar10_batch(path, pixels, labels=None) -> Path:
    """Inverse of :func:`read_cifar10_batch`; pixels in [0, 1] are rounded to bytes."""
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    if pixels.shape[1] != CIFAR_D:
        raise InvalidInputError(f"CIFAR-10 rows have {CIFAR_D} pixels, got {pixels.shape[1]}")
    labels = np.zeros(pixels.shape[0], dtype=np.uint8) if labels is None else np.asarray(labels, dtype=np.uint8)
    rec = np.empty((pixels.shape[0], CIFAR_RECORD), dtype=np.uint8)
    rec[:, 0] = labels
    rec[:, 1:] = np.rint(np.clip(pixels, 0, 1) * 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rec.tofile(path)
    return path


def _cifar_dir(directory: Path) -> Path:
    nested = directory / "cifar-10-batches-bin"
    return nested if nested.is_dir() and not (directory / CIFAR_TEST_FILES[0]).exists() else directory


def load_cifar10(directory, split: str = "train") -> Dataset:
    """All records of the train (5 files) or test (1 file) split, labels dropped."""
    files = {"train": CIFAR_TRAIN_FILES, "test": CIFAR_TEST_FILES}.get(split)
    if files is None:
        raise InvalidInputError(f"split must be 'train' or 'test', got {split!r}")
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"CIFAR-10 directory {directory} does not exist")
    base = _cifar_dir(directory)
    parts = [read_cifar10_batch(base / f)[0] for f in files]
    return Dataset(np.concatenate(parts), name=f"cifar10-{split}", value_range=(0.0, 1.0))


def load_matrix(path, name: str | None = None) -> Dataset:
    """A CSV matrix or a ``.bin`` + ``.json`` binary matrix, chosen by suffix."""
    path = Path(path)
    if path.suffix == ".csv":
        x = io.read_csv(path)
    else:
        x, _ = io.read_binary(path)
        if x.ndim != 2:
            raise FormatError(f"{path}: expected a matrix, got shape {x.shape}")
    return Dataset(x, name=name or path.stem)


def distance_stats(dataset, subsample: int = DEFAULT_SUBSAMPLE, seed: int = 0) -> dict:
    """Max, median and mean pairwise Euclidean distance of a seeded row subsample."""
    x = dataset.x if isinstance(dataset, Dataset) else dataset
    return distance_summary(x, subsample, seed)
