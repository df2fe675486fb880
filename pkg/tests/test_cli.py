import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from scoreconf import cli
from scoreconf.config import load_config, resolve
from scoreconf.data import CIFAR_TEST_FILES, CIFAR_TRAIN_FILES, write_cifar10_batch
from scoreconf.errors import ConfigError
from scoreconf.io import read_csv

MIXTURE = {
    "data": {"kind": "mixture", "n": 400},
    "schedule": {"sigma1": 4.0, "sigmaL": 0.1, "L": 6},
    "sampler": {"T": 5, "n_chains": 4},
    "train": {"iterations": 20, "H": 8, "log_every": 0},
}


def write_config(tmp_path, doc, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


def run(tmp_path, command, doc, out="out", *extra):
    cfg = write_config(tmp_path, doc)
    return cli.main([command, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


@pytest.fixture
def cifar(tmp_path_factory):
    d = tmp_path_factory.mktemp("cifar")
    rng = np.random.default_rng(0)
    for f in CIFAR_TRAIN_FILES:
        write_cifar10_batch(d / f, rng.random((4, 3072)))
    write_cifar10_batch(d / CIFAR_TEST_FILES[0], rng.random((12, 3072)))
    return d


class TestConfig:
    def test_defaults(self):
        cfg = resolve({})
        assert cfg.sampler.T == 5 and cfg.train.lr == 1e-4 and cfg.train.ema_momentum == 0.999
        assert cfg.schedule.sigma1 == "from-data" and cfg.fig2.n_chains == 100

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="bogus"):
            resolve({"sampler": {"bogus": 1}})
        with pytest.raises(ConfigError):
            resolve({"nope": 1})

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            resolve({"sampler": {"epsilon": "guess"}})
        with pytest.raises(ConfigError):
            resolve({"sampler": {"T": 0}})
        with pytest.raises(ConfigError):
            resolve({"fig2": {"runs": [{"sigma1": 1.0}]}})

    def test_round_trip(self, tmp_path):
        cfg = resolve(MIXTURE)
        path = cfg.dump(tmp_path / "c.yaml")
        again = load_config(path, {"out": cfg.out})
        assert again.to_dict() == cfg.to_dict()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")


class TestSchedule:
    DOC = {"schedule": {"sigma1": 50.0, "sigmaL": 0.01, "D": 3072}, "sampler": {"T": 5}}

    def test_cifar_like(self, tmp_path, capsys):
        assert run(tmp_path, "schedule", self.DOC) == cli.EXIT_OK
        doc = json.loads((tmp_path / "out" / "schedule.json").read_text())
        assert 215 <= doc["schedule"]["L"] <= 240
        assert 6.2e-6 / 2 <= doc["langevin"]["epsilon"] <= 6.2e-6 * 2
        steps = read_csv(tmp_path / "out" / "steps.csv")
        assert steps.shape == (doc["schedule"]["L"], 3)
        assert "L=" in capsys.readouterr().out

    def test_two_scales(self, tmp_path):
        doc = {"schedule": {"sigma1": 0.0105, "sigmaL": 0.01, "D": 3072}, "sampler": {"T": 5}}
        assert run(tmp_path, "schedule", doc) == 0
        assert json.loads((tmp_path / "out" / "schedule.json").read_text())["schedule"]["L"] == 2

    def test_byte_identical(self, tmp_path):
        run(tmp_path, "schedule", self.DOC, "a")
        run(tmp_path, "schedule", self.DOC, "b")
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name

    def test_manifest_and_echo(self, tmp_path):
        run(tmp_path, "schedule", self.DOC)
        out = tmp_path / "out"
        manifest = json.loads((out / "manifest.json").read_text())
        names = {e["file"] for e in manifest["files"]}
        assert {"schedule.json", "steps.csv", "config.resolved.yaml"} <= names
        echo = yaml.safe_load((out / "config.resolved.yaml").read_text())
        assert echo["schedule"]["sigma1"] == 50.0 and echo["train"]["lr"] == 1e-4

    def test_infeasible_is_config_error(self, tmp_path):
        assert run(tmp_path, "schedule", {"schedule": {"sigma1": 1.0, "D": 2}}) == cli.EXIT_CONFIG

    def test_from_data(self, tmp_path):
        doc = {"data": {"kind": "gaussian", "mean": [0.0] * 64, "n": 200}, "schedule": {"sigma1": "from-data", "sigmaL": 0.01}}
        assert run(tmp_path, "schedule", doc) == 0
        doc = json.loads((tmp_path / "out" / "schedule.json").read_text())
        assert doc["sigma1_source"] == "max_pairwise_distance"


class TestExitCodes:
    def test_config(self, tmp_path):
        assert run(tmp_path, "stats", {"bogus": 1}) == cli.EXIT_CONFIG

    def test_data(self, tmp_path, monkeypatch):
        monkeypatch.delenv("CIFAR10_DIR", raising=False)
        assert run(tmp_path, "stats", {"data": {"kind": "cifar10"}}) == cli.EXIT_DATA
        assert run(tmp_path, "fig2", {}) == cli.EXIT_DATA

    def test_verification(self, tmp_path, monkeypatch):
        def failing(suites, seed):
            return {"n_checks": 1, "n_failed": 1, "failed": ["x"], "passed": False, "checks": []}

        monkeypatch.setattr(cli, "run_suites", failing)
        assert run(tmp_path, "verify", {}) == cli.EXIT_VERIFY

    def test_divergence(self, tmp_path):
        doc = dict(MIXTURE, train={"iterations": 3, "lr": 1e300, "H": 4})
        assert run(tmp_path, "train", doc) == cli.EXIT_DIVERGED


class TestCommands:
    def test_train_then_sample_checkpoint(self, tmp_path):
        assert run(tmp_path, "train", MIXTURE, "t") == 0
        ckpt = tmp_path / "t" / "checkpoint.ckpt"
        assert ckpt.exists() and read_csv(tmp_path / "t" / "losses.csv").shape == (20, 2)
        doc = dict(MIXTURE, sampler={"T": 5, "n_chains": 3, "field": "checkpoint", "checkpoint": str(ckpt), "epsilon": 1e-4})
        assert run(tmp_path, "sample", doc, "s") == 0
        lines = (tmp_path / "s" / "samples.csv").read_text().splitlines()
        assert lines[0] == "x0,x1" and len(lines) == 4

    def test_sample_deterministic(self, tmp_path):
        run(tmp_path, "sample", MIXTURE, "a", "--seed", "3")
        run(tmp_path, "sample", MIXTURE, "b", "--seed", "3")
        run(tmp_path, "sample", MIXTURE, "c", "--seed", "4")
        a, b, c = (read_csv(tmp_path / k / "samples.csv") for k in "abc")
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_interpolate(self, tmp_path):
        doc = dict(MIXTURE, sampler={"T": 5, "n_chains": 1, "record_tape": True, "init_seed": 1})
        run(tmp_path, "sample", doc, "a", "--seed", "1")
        run(tmp_path, "sample", doc, "b", "--seed", "2")
        tapes = [str(tmp_path / "a" / "tape.bin"), str(tmp_path / "b" / "tape.bin")]
        doc = dict(MIXTURE, sampler={"T": 5, "n_chains": 1, "init_seed": 1, "K": 8, "tapes": tapes})
        assert run(tmp_path, "interpolate", doc, "i") == 0
        assert read_csv(tmp_path / "i" / "interpolation.csv").shape == (8, 2)
        doc["sampler"]["include_endpoints"] = True
        run(tmp_path, "interpolate", doc, "j")
        rows = read_csv(tmp_path / "j" / "interpolation.csv")
        assert np.array_equal(rows[0], read_csv(tmp_path / "a" / "samples.csv")[0])
        assert np.array_equal(rows[-1], read_csv(tmp_path / "b" / "samples.csv")[0])

    def test_interpolate_needs_two_tapes(self, tmp_path):
        assert run(tmp_path, "interpolate", dict(MIXTURE, sampler={"tapes": ["x"]})) == cli.EXIT_CONFIG

    def test_stats(self, tmp_path):
        assert run(tmp_path, "stats", {"data": {"kind": "mixture", "n": 300}}) == 0
        s = json.loads((tmp_path / "out" / "stats.json").read_text())
        assert s["N"] == 300 and s["max"] >= s["median"] > 0

    def test_stats_cifar_format(self, tmp_path, cifar):
        assert run(tmp_path, "stats", {"data": {"kind": "cifar10", "path": str(cifar)}}) == 0
        assert json.loads((tmp_path / "out" / "stats.json").read_text())["N"] == 20

    def test_fig2_pipeline(self, tmp_path, cifar):
        doc = {
            "data": {"path": str(cifar)},
            "fig2": {"n_chains": 3, "runs": [{"name": "short", "sigma1": 50.0, "sigmaL": 1.0, "T": 2, "L": 5, "epsilon": 0.1}]},
        }
        assert run(tmp_path, "fig2", doc) == 0
        res = json.loads((tmp_path / "out" / "fig2.json").read_text())
        assert [r["name"] for r in res["rows"]] == ["data", "short"] and res["N"] == 12

    def test_verify_selected_suite(self, tmp_path, monkeypatch):
        from scoreconf import verify

        monkeypatch.setattr(cli, "run_suites", lambda suites, seed: verify.run_suites(suites, seed) if suites == ["prop3"] else None)
        assert run(tmp_path, "verify", {"suites": ["prop3"]}) == 0
        report = json.loads((tmp_path / "out" / "verify.json").read_text())
        assert report["n_failed"] == 0 and all(c["suite"] == "prop3" for c in report["checks"])

    def test_threads_flag(self, tmp_path):
        assert run(tmp_path, "stats", {"data": {"kind": "mixture", "n": 50}}, "out", "--threads", "1") == 0


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "scripts" / "configs").glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_resolve(path):
    load_config(path)
