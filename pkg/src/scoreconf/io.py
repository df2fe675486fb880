"""On-disk matrix formats shared by the data, sampler and CLI layers.

Binary arrays are raw little-endian float64 in C order (``<stem>.bin``)
next to a JSON sidecar (``<stem>.json``) holding ``shape`` plus free-form
metadata. CSV matrices have an optional header row of column names.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import FormatError

BINARY_FORMAT_VERSION = 1
_DTYPE = "<f8"


def _stem(path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".bin", ".json") else path


def write_binary(path, array, **meta) -> tuple[Path, Path]:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(array, dtype=_DTYPE)
    bin_path, side_path = stem.with_suffix(".bin"), stem.with_suffix(".json")
    bin_path.write_bytes(arr.tobytes(order="C"))
    sidecar = {"version": BINARY_FORMAT_VERSION, "dtype": _DTYPE, "shape": list(arr.shape), **meta}
    side_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return bin_path, side_path


def read_binary(path) -> tuple[np.ndarray, dict]:
    stem = _stem(path)
    bin_path, side_path = stem.with_suffix(".bin"), stem.with_suffix(".json")
    for p in (bin_path, side_path):
        if not p.exists():
            raise FormatError(f"missing file {p}")
    try:
        meta = json.loads(side_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side_path}: invalid JSON sidecar ({exc})") from exc
    if meta.get("version") != BINARY_FORMAT_VERSION or meta.get("dtype") != _DTYPE:
        raise FormatError(f"{side_path}: unsupported version/dtype {meta.get('version')!r}/{meta.get('dtype')!r}")
    shape = tuple(int(s) for s in meta["shape"])
    raw = bin_path.read_bytes()
    expected = int(np.prod(shape, dtype=np.int64)) * 8
    if len(raw) != expected:
        raise FormatError(f"{bin_path}: {len(raw)} bytes, sidecar shape {shape} needs {expected}")
    return np.frombuffer(raw, dtype=_DTYPE).reshape(shape).astype(np.float64), meta


def write_csv(path, matrix, header=True, columns=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(columns or [f"x{k}" for k in range(m.shape[1])])
        for row in m:
            w.writerow([repr(float(v)) for v in row])
    return path


def read_csv(path) -> np.ndarray:
    """Read a numeric CSV matrix; a first row that does not parse as numbers is taken as a header."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"missing file {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        m = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry ({exc})") from exc
    if m.ndim != 2 or (rows and len({len(r) for r in rows}) != 1):
        raise FormatError(f"{path}: ragged rows")
    return m
