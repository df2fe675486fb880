"""Declarative experiment configuration, loaded from YAML.

Every field has a documented default; :func:`resolve` expands a partial
document into the full tree and rejects unknown keys, and
:func:`ExperimentConfig.to_dict` gives back the resolved document that each
run echoes into its output directory.

Example::

    data:
      kind: cifar10            # cifar10 | mixture | gaussian | file
      path: /data/cifar-10-batches-bin
    schedule:
      sigma1: from-data        # or a number
      sigmaL: 0.01
      target_C: 0.5
    sampler:
      T: 5
      epsilon: solve           # or a number
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass
class DataConfig:
    kind: str = "mixture"
    path: str | None = None
    split: str = "train"
    centers: list = field(default_factory=lambda: [[-2.0, 0.0], [2.0, 0.0]])
    weights: list | None = None
    component_sigma: float = 0.3
    mean: list = field(default_factory=lambda: [1.0, -0.5])
    std: float = 1.0
    n: int = 20_000
    seed: int = 0


@dataclass
class ScheduleConfig:
    sigma1: float | str = "from-data"
    sigmaL: float = 0.01
    target_C: float = 0.5
    D: int | None = None
    L: int | None = None
    subsample: int = 10_000


@dataclass
class SamplerConfig:
    T: int = 5
    epsilon: float | str = "solve"
    denoise: bool = True
    n_chains: int = 100
    init: str = "uniform"
    init_seed: int | None = None
    record_tape: bool = False
    field: str = "oracle"
    checkpoint: str | None = None
    use_ema: bool = True
    K: int = 8
    tapes: list | None = None
    include_endpoints: bool = False


@dataclass
class TrainSection:
    H: int = 128
    depth: int = 2
    activation: str = "silu"
    lr: float = 1e-4
    batch_size: int = 128
    ema_momentum: float = 0.999
    iterations: int = 20_000
    log_every: int = 1000


@dataclass
class Fig2Run:
    name: str
    sigma1: float
    sigmaL: float = 0.01
    T: int = 5
    epsilon: float | str = "solve"
    L: int | None = None


def _default_fig2_runs():
    return [
        {"name": "sigma1_50", "sigma1": 50.0, "sigmaL": 0.01, "T": 5, "epsilon": "solve", "L": None},
        {"name": "sigma1_1", "sigma1": 1.0, "sigmaL": 0.01, "T": 100, "epsilon": 2e-5, "L": 10},
    ]


@dataclass
class Fig2Config:
    n_chains: int = 100
    n_components: int = 10_000
    baseline_subsample: int = 10_000
    runs: list = field(default_factory=_default_fig2_runs)


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "runs/out"
    suites: list = field(default_factory=lambda: ["prop1", "prop2", "prop3"])
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    train: TrainSection = field(default_factory=TrainSection)
    fig2: Fig2Config = field(default_factory=Fig2Config)

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path) -> Path:
        """Write the resolved document. ``out`` is left out so reruns elsewhere stay byte-identical."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = self.to_dict()
        doc.pop("out")
        path.write_text(yaml.safe_dump(doc, sort_keys=True))
        return path


_SECTIONS = {"data": DataConfig, "schedule": ScheduleConfig, "sampler": SamplerConfig, "train": TrainSection, "fig2": Fig2Config}


def _build(cls, doc, where):
    if doc is None:
        return cls()
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(doc).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed {sorted(known)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def resolve(doc: dict | None) -> ExperimentConfig:
    doc = dict(doc or {})
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}; allowed {sorted(top)}")
    kwargs = {k: v for k, v in doc.items() if k not in _SECTIONS}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build(cls, doc.get(name), name)
    cfg = ExperimentConfig(**kwargs)
    cfg.fig2.runs = [asdict(_build(Fig2Run, r, f"fig2.runs[{k}]")) for k, r in enumerate(cfg.fig2.runs)]
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    s, smp = cfg.schedule, cfg.sampler
    if isinstance(s.sigma1, str) and s.sigma1 != "from-data":
        raise ConfigError(f"schedule.sigma1: expected a number or 'from-data', got {s.sigma1!r}")
    if isinstance(smp.epsilon, str) and smp.epsilon != "solve":
        raise ConfigError(f"sampler.epsilon: expected a number or 'solve', got {smp.epsilon!r}")
    if cfg.data.kind not in ("cifar10", "mixture", "gaussian", "file"):
        raise ConfigError(f"data.kind: unknown kind {cfg.data.kind!r}")
    if smp.field not in ("oracle", "checkpoint"):
        raise ConfigError(f"sampler.field: expected 'oracle' or 'checkpoint', got {smp.field!r}")
    if smp.init not in ("uniform", "gaussian"):
        raise ConfigError(f"sampler.init: expected 'uniform' or 'gaussian', got {smp.init!r}")
    for name, val in (("sampler.T", smp.T), ("sampler.n_chains", smp.n_chains), ("sampler.K", smp.K)):
        if not isinstance(val, int) or val < 1:
            raise ConfigError(f"{name}: expected a positive integer, got {val!r}")


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    doc = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            doc = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return resolve(doc)
