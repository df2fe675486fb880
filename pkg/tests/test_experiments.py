import numpy as np
import pytest

from scoreconf.errors import InvalidInputError
from scoreconf.experiments import (
    GAUSSIAN_MEAN,
    GAUSSIAN_STD,
    gaussian_score_experiment,
    mixture_distance_experiment,
    relative_score_error,
)
from scoreconf.net import TrainConfig
from scoreconf.oracle import GaussianMixtureOracle, ZeroField
from scoreconf.verify import radial_battery, responsibility_battery, run_suites, variance_battery


class TestBatteries:
    def test_responsibility(self):
        checks = responsibility_battery(n_configs=6, n_samples=2000, seed=1)
        assert len(checks) == 7 and all(c["passed"] for c in checks)
        assert checks[-1]["bound"] < 1e-17

    def test_radial(self):
        checks = radial_battery(dims_integral=(2,), ks_dims=(8, 512), n_ks=2000)
        assert all(c["passed"] for c in checks)

    def test_variance(self):
        checks = variance_battery(n_configs=4, n_chains=500, seed=2)
        assert all(c["passed"] for c in checks)
        assert checks[-1]["max_rel_dev"] <= 1e-12

    def test_deterministic(self):
        a = variance_battery(n_configs=2, n_chains=200, seed=5)
        b = variance_battery(n_configs=2, n_chains=200, seed=5)
        assert a == b

    def test_unknown_suite(self):
        with pytest.raises(InvalidInputError):
            run_suites(["prop9"])


class TestScoreError:
    def test_exact_field(self):
        exact = GaussianMixtureOracle(np.asarray(GAUSSIAN_MEAN)[None], base_sigma=GAUSSIAN_STD)
        assert relative_score_error(exact, GAUSSIAN_MEAN, GAUSSIAN_STD, 0.8) < 1e-14

    def test_zero_field(self):
        assert relative_score_error(ZeroField(2), GAUSSIAN_MEAN, GAUSSIAN_STD, 0.8) == 1.0

    def test_short_training_reports(self):
        rep = gaussian_score_experiment(iterations=50, H=8, n_data=500, config=TrainConfig(batch_size=32, lr=1e-3))
        assert rep.errors_ema.shape == (5,) and rep.result.losses.shape == (50,)
        assert rep.probe_sigmas[0] == rep.schedule.sigma1 and rep.probe_sigmas[-1] == pytest.approx(rep.schedule.sigmaL)


class TestMixtureDistance:
    def test_samples_land_on_data(self):
        rng = np.random.default_rng(0)
        x = 0.5 + 0.1 * rng.standard_normal((30, 64))
        runs = [{"name": "wide", "sigma1": 3.0, "sigmaL": 0.01, "T": 5, "epsilon": "solve", "L": None}]
        res = mixture_distance_experiment(x, runs, n_chains=8, seed=1)
        row = res["rows"][1]
        assert row["L"] > 10 and row["median_nearest_data"] < 1e-6
        assert res["rows"][0]["name"] == "data" and res["rows"][0]["n_points"] == 30

    def test_literal_epsilon_and_L(self):
        x = np.random.default_rng(1).random((10, 16))
        runs = [{"name": "short", "sigma1": 1.0, "sigmaL": 0.01, "T": 3, "epsilon": 2e-5, "L": 4}]
        row = mixture_distance_experiment(x, runs, n_chains=4)["rows"][1]
        assert row["L"] == 4 and row["epsilon"] == 2e-5 and row["mean_pairwise"] >= 0
