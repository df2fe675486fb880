"""Command-line entry point: ``scoreconf <command> --config run.yaml [--seed N] [--out DIR] [--threads K]``.

Every command writes ``config.resolved.yaml`` and ``manifest.json`` (file
names, sizes and SHA-256 digests) into the output directory. Nothing
time-dependent is written, so identical inputs give identical bytes.

Exit status: 0 success, 2 configuration or invalid input, 3 data/format,
4 verification failure, 5 divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .config import ExperimentConfig, load_config
from .data import distance_stats, load_cifar10
from .errors import (
    ConfigError,
    DivergedChainError,
    FormatError,
    InvalidInputError,
    TrainingDivergedError,
    VerificationFailure,
)
from .experiments import cifar_dir, load_dataset, mixture_distance_experiment, resolve_schedule
from .net import TrainConfig, load_checkpoint, save_checkpoint, train, MlpScoreNet
from .oracle import GaussianMixtureOracle
from .sampler import NoiseTape, anneal_sample, initial_points, interpolate
from .verify import run_suites

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_VERIFY, EXIT_DIVERGED = 0, 2, 3, 4, 5

log = logging.getLogger("scoreconf")


def _json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _finish(cfg: ExperimentConfig, command: str, out: Path, files: list, extra=None):
    files = [Path(f) for f in files] + [cfg.dump(out / "config.resolved.yaml")]
    entries = []
    for f in sorted(files, key=lambda p: p.name):
        data = f.read_bytes()
        entries.append({"file": f.name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    _json(out / "manifest.json", {"command": command, "seed": cfg.seed, "files": entries, **(extra or {})})


def _field(cfg: ExperimentConfig, data):
    smp = cfg.sampler
    if smp.field == "checkpoint":
        if not smp.checkpoint:
            raise ConfigError("sampler.field is 'checkpoint' but sampler.checkpoint is not set")
        net, ema, _ = load_checkpoint(smp.checkpoint)
        return ema.as_net(net.activation) if smp.use_ema else net
    return GaussianMixtureOracle(data.x)


def _init(cfg: ExperimentConfig, M, D, scale):
    seed = cfg.seed if cfg.sampler.init_seed is None else cfg.sampler.init_seed
    return initial_points(M, D, seed=seed, kind=cfg.sampler.init, scale=scale)


def cmd_schedule(cfg: ExperimentConfig, out: Path) -> int:
    data = load_dataset(cfg.data) if cfg.schedule.sigma1 == "from-data" else None
    schedule, lcfg, info = resolve_schedule(cfg, data)
    alphas = schedule.step_sizes(lcfg.epsilon)
    doc = {"schedule": schedule.to_dict(), "langevin": lcfg.to_dict(), "schedule_id": schedule.schedule_id, **info}
    f1 = _json(out / "schedule.json", doc)
    f2 = io.write_csv(out / "steps.csv", np.column_stack([np.arange(1, schedule.L + 1), schedule.sigmas, alphas]), columns=["i", "sigma", "alpha"])
    summary = (
        f"sigma1={schedule.sigma1:.6g} sigmaL={schedule.sigmaL:.6g} D={schedule.D} "
        f"gamma={schedule.gamma:.8f} L={schedule.L} T={lcfg.T} epsilon={lcfg.epsilon:.4e}\n"
    )
    f3 = out / "summary.txt"
    f3.write_text(summary)
    print(summary, end="")
    _finish(cfg, "schedule", out, [f1, f2, f3])
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    report = run_suites(cfg.suites, cfg.seed)
    f = _json(out / "verify.json", report)
    print(f"{report['n_checks'] - report['n_failed']}/{report['n_checks']} checks passed")
    for name in report["failed"]:
        print(f"FAILED {name}")
    _finish(cfg, "verify", out, [f], {"passed": report["passed"]})
    if not report["passed"]:
        raise VerificationFailure(f"{report['n_failed']} checks failed")
    return EXIT_OK


def cmd_fig2(cfg: ExperimentConfig, out: Path) -> int:
    d = cifar_dir(cfg.data.path)
    if d is None:
        raise FormatError("the mixture-distance experiment needs CIFAR-10: set data.path or $CIFAR10_DIR")
    test = load_cifar10(d, "test").x[: cfg.fig2.n_components]
    res = mixture_distance_experiment(test, cfg.fig2.runs, cfg.fig2.n_chains, cfg.seed, cfg.fig2.baseline_subsample, log=log.info)
    f1 = _json(out / "fig2.json", res)
    f2 = out / "fig2.csv"
    lines = ["name,mean_pairwise"] + [f"{r['name']},{r['mean_pairwise']!r}" for r in res["rows"]]
    f2.write_text("\n".join(lines) + "\n")
    for r in res["rows"]:
        print(f"{r['name']:>12s}  mean pairwise distance {r['mean_pairwise']:.4f}")
    _finish(cfg, "fig2", out, [f1, f2])
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, out: Path) -> int:
    data = load_dataset(cfg.data)
    schedule, _, _ = resolve_schedule(cfg, data)
    t = cfg.train
    tc = TrainConfig(lr=t.lr, batch_size=t.batch_size, ema_momentum=t.ema_momentum)
    net = MlpScoreNet.init(data.D, t.H, t.depth, t.activation, seed=cfg.seed)
    res = train(net, data.x, schedule, tc, t.iterations, seed=cfg.seed + 1, log_every=t.log_every, log=lambda i, v: log.info("iter %d loss %.5f", i, v))
    f1 = save_checkpoint(out / "checkpoint.ckpt", res.net, res.ema, t.iterations, cfg.seed, schedule_id=schedule.schedule_id)
    f2 = io.write_csv(out / "losses.csv", np.column_stack([np.arange(1, t.iterations + 1), res.losses]), columns=["iteration", "loss"])
    f3 = _json(out / "schedule.json", schedule.to_dict())
    tail = float(res.losses[-min(100, len(res.losses)):].mean()) if len(res.losses) else float("nan")
    print(f"trained {t.iterations} iterations, final mean loss {tail:.5f}")
    _finish(cfg, "train", out, [f1, f2, f3])
    return EXIT_OK


def cmd_sample(cfg: ExperimentConfig, out: Path) -> int:
    data = load_dataset(cfg.data)
    schedule, lcfg, _ = resolve_schedule(cfg, data)
    field = _field(cfg, data)
    init = _init(cfg, cfg.sampler.n_chains, schedule.D, schedule.sigma1)
    batch, tape = anneal_sample(field, schedule, lcfg, init, cfg.seed, record_tape=cfg.sampler.record_tape)
    files = [io.write_csv(out / "samples.csv", batch.samples), *batch.save(out / "samples")]
    if tape is not None:
        files += tape.save(out / "tape", init=init.tolist(), schedule_id=schedule.schedule_id, seed=cfg.seed)
    print(f"wrote {batch.M} samples of dimension {batch.D}")
    _finish(cfg, "sample", out, files)
    return EXIT_OK


def cmd_interpolate(cfg: ExperimentConfig, out: Path) -> int:
    smp = cfg.sampler
    if not smp.tapes or len(smp.tapes) != 2:
        raise ConfigError("sampler.tapes must list exactly two tape files")
    data = load_dataset(cfg.data)
    schedule, lcfg, _ = resolve_schedule(cfg, data)
    tapes, inits = [], []
    for p in smp.tapes:
        z, meta = io.read_binary(p)
        tapes.append(NoiseTape(z).chain(0))
        inits.append(np.asarray(meta["init"])[0] if "init" in meta else None)
    init = inits[0] if inits[0] is not None else _init(cfg, 1, schedule.D, schedule.sigma1)[0]
    if inits[1] is not None and not np.array_equal(inits[1], init):
        log.warning("the two tapes were recorded from different initial points; the second endpoint will differ from its original")
    batch = interpolate(_field(cfg, data), schedule, lcfg, init, tapes[0], tapes[1], smp.K, include_endpoints=smp.include_endpoints, seed=cfg.seed)
    files = [io.write_csv(out / "interpolation.csv", batch.samples), *batch.save(out / "interpolation")]
    print(f"wrote {batch.M} interpolated samples")
    _finish(cfg, "interpolate", out, files)
    return EXIT_OK


def cmd_stats(cfg: ExperimentConfig, out: Path) -> int:
    data = load_dataset(cfg.data)
    stats = distance_stats(data, cfg.schedule.subsample, cfg.seed)
    stats.update({"dataset": data.name, "N": data.N, "D": data.D})
    f = _json(out / "stats.json", stats)
    print(f"max={stats['max']:.4f} median={stats['median']:.4f} mean={stats['mean']:.4f} (n={stats['n_points']})")
    _finish(cfg, "stats", out, [f])
    return EXIT_OK


COMMANDS = {
    "schedule": cmd_schedule,
    "verify": cmd_verify,
    "fig2": cmd_fig2,
    "train": cmd_train,
    "sample": cmd_sample,
    "interpolate": cmd_interpolate,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scoreconf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--config", type=Path, help="YAML experiment config; omitted keys take their defaults")
        c.add_argument("--seed", type=int)
        c.add_argument("--out", type=Path)
        c.add_argument("--threads", type=int, help="cap BLAS threads")
        c.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, {"seed": args.seed, "out": str(args.out) if args.out else None})
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](cfg, out)
    except (ConfigError, InvalidInputError) as exc:
        code, exc_ = EXIT_CONFIG, exc
    except FormatError as exc:
        code, exc_ = EXIT_DATA, exc
    except VerificationFailure as exc:
        code, exc_ = EXIT_VERIFY, exc
    except (DivergedChainError, TrainingDivergedError) as exc:
        code, exc_ = EXIT_DIVERGED, exc
    print(f"scoreconf {args.command}: {type(exc_).__name__}: {exc_}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
