import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp

from scoreconf.errors import DegenerateDistributionError, InvalidInputError
from scoreconf.oracle import (
    GaussianMixtureOracle,
    ScoreField,
    empirical_responsibility_mean,
    gaussian_score,
    mixture_score,
    point_mass,
    prop1_bound,
    responsibilities,
)


def reference_log_density(x, centers, var):
    """log of (1/N) sum_k N(x | c_k, var I), written out per component."""
    d = centers.shape[1]
    logs = [-0.5 * np.sum((x - c) ** 2) / var - 0.5 * d * math.log(2 * math.pi * var) for c in centers]
    return logsumexp(logs) - math.log(len(centers))


def central_diff_grad(f, x, h=1e-5):
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestGaussianScore:
    def test_vanishes_at_mode(self):
        mu = np.array([0.3, -1.0, 2.0])
        np.testing.assert_array_equal(gaussian_score(mu, mu, 0.7, 0.2), np.zeros(3))

    def test_point_mass(self):
        np.testing.assert_array_equal(gaussian_score(np.array([4.0, 0.0]), np.zeros(2), 0.0, 2.0), [-1.0, 0.0])

    def test_degenerate(self):
        with pytest.raises(DegenerateDistributionError):
            gaussian_score(np.zeros(2), np.zeros(2), 0.0, 0.0)

    def test_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            d = int(rng.integers(1, 6))
            x, mu = rng.normal(size=d), rng.normal(size=d)
            s2, sigma = float(rng.uniform(0, 2)), float(rng.uniform(0.1, 2))
            var = s2 + sigma**2
            logp = lambda z: -0.5 * np.sum((z - mu) ** 2) / var
            np.testing.assert_allclose(gaussian_score(x, mu, s2, sigma), central_diff_grad(logp, x), rtol=1e-6, atol=1e-9)


class TestResponsibilities:
    def test_single_component(self):
        o = GaussianMixtureOracle(np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(responsibilities(np.array([5.0, -3.0]), o, 0.5), [1.0])

    def test_symmetric(self):
        o = GaussianMixtureOracle(np.array([[-1.0, 0.0], [1.0, 0.0]]))
        np.testing.assert_array_equal(responsibilities(np.array([0.0, 3.0]), o, 0.7), [0.5, 0.5])

    def test_against_direct_density_ratio(self):
        rng = np.random.default_rng(1)
        centers = rng.normal(size=(4, 3)) * 2
        o = GaussianMixtureOracle(centers, base_sigma=0.3)
        for _ in range(10):
            x = rng.normal(size=3)
            var = 0.3**2 + 0.8**2
            dens = np.array([math.exp(-0.5 * np.sum((x - c) ** 2) / var) for c in centers])
            np.testing.assert_allclose(o.responsibilities(x, 0.8), dens / dens.sum(), rtol=1e-12)

    def test_deep_in_basin(self):
        o = GaussianMixtureOracle(np.array([[0.0, 0.0], [18.0, 0.0]]))
        r = o.responsibilities(np.array([17.9, 0.0]), 0.01)
        assert r[1] == 1.0 and r[0] == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.0, 100.0), st.floats(1e-3, 10.0), st.integers(1, 300), st.integers(0, 2**31))
    def test_extreme_separations(self, ratio, sigma, dim, seed):
        rng = np.random.default_rng(seed)
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        centers = np.stack([np.zeros(dim), ratio * sigma * direction])
        o = GaussianMixtureOracle(centers)
        x = rng.uniform(-1, 2) * centers[1] + sigma * rng.normal(size=dim)
        r = o.responsibilities(x, sigma)
        assert np.all(np.isfinite(r))
        assert np.all((r >= 0) & (r <= 1))
        assert abs(r.sum() - 1) <= 1e-12


class TestMixtureScore:
    def test_single_component_is_gaussian(self):
        c = np.array([0.5, -0.5, 2.0])
        o = GaussianMixtureOracle(c[None], base_sigma=0.4)
        x = np.array([1.0, 1.0, 1.0])
        np.testing.assert_allclose(mixture_score(x, o, 0.3), gaussian_score(x, c, 0.16, 0.3), rtol=1e-14)

    def test_midpoint_average(self):
        a, b = np.array([-2.0, 1.0]), np.array([2.0, 3.0])
        o = GaussianMixtureOracle(np.stack([a, b]))
        mid = 0.5 * (a + b)
        expected = 0.5 * (gaussian_score(mid, a, 0, 1.5) + gaussian_score(mid, b, 0, 1.5))
        np.testing.assert_allclose(o.score(mid, 1.5), expected, rtol=1e-14, atol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        n, d = int(rng.integers(1, 11)), int(rng.integers(1, 9))
        centers = rng.normal(size=(n, d))
        base, sigma = float(rng.uniform(0, 0.5)), float(rng.uniform(0.3, 1.5))
        o = GaussianMixtureOracle(centers, base_sigma=base)
        x = rng.normal(size=d)
        var = base**2 + sigma**2
        fd = central_diff_grad(lambda z: reference_log_density(z, centers, var), x)
        np.testing.assert_allclose(o.score(x, sigma), fd, rtol=1e-5, atol=1e-7)

    def test_log_density_matches_reference(self):
        rng = np.random.default_rng(5)
        centers = rng.normal(size=(5, 3))
        o = GaussianMixtureOracle(centers)
        x = rng.normal(size=3)
        assert o.log_density(x, 0.7) == pytest.approx(reference_log_density(x, centers, 0.49), rel=1e-13)

    def test_batched_matches_rows(self):
        rng = np.random.default_rng(6)
        o = GaussianMixtureOracle(rng.normal(size=(7, 4)))
        xs = rng.normal(size=(5, 4))
        batched = o.score(xs, 0.9)
        for k in range(5):
            np.testing.assert_allclose(batched[k], o.score(xs[k], 0.9), rtol=1e-13)

    def test_blocked_path_matches_direct(self):
        rng = np.random.default_rng(7)
        centers = rng.uniform(size=(3000, 64))
        o = GaussianMixtureOracle(centers)
        xs = rng.uniform(size=(40, 64))  # 40*3000*64 > direct threshold
        direct = GaussianMixtureOracle(centers)
        expected = np.stack([direct.score(x, 0.5) for x in xs])
        np.testing.assert_allclose(o.score(xs, 0.5), expected, rtol=1e-9, atol=1e-10)

    def test_is_score_field(self):
        assert isinstance(point_mass(np.zeros(3)), ScoreField)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-5, 5))
    def test_translation_equivariance(self, seed, shift):
        rng = np.random.default_rng(seed)
        centers, x = rng.normal(size=(4, 3)), rng.normal(size=3)
        v = shift * rng.normal(size=3)
        a, b = GaussianMixtureOracle(centers), GaussianMixtureOracle(centers + v)
        np.testing.assert_allclose(a.responsibilities(x, 0.8), b.responsibilities(x + v, 0.8), atol=1e-12)
        np.testing.assert_allclose(a.score(x, 0.8), b.score(x + v, 0.8), rtol=1e-9, atol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.1, 10.0))
    def test_scaling(self, seed, lam):
        rng = np.random.default_rng(seed)
        centers, x = rng.normal(size=(4, 3)), rng.normal(size=3)
        a = GaussianMixtureOracle(centers, base_sigma=0.2)
        b = GaussianMixtureOracle(lam * centers, base_sigma=0.2 * lam)
        np.testing.assert_allclose(b.score(lam * x, 0.8 * lam), a.score(x, 0.8) / lam, rtol=1e-9, atol=1e-12)


class TestResponsibilityBound:
    def test_zero_distance(self):
        assert prop1_bound(np.ones(4), np.ones(4), 1.0) == 0.5

    def test_image_scale(self):
        b = prop1_bound(np.zeros(3072), np.r_[18.0, np.zeros(3071)], 1.0)
        assert b == pytest.approx(0.5 * math.exp(-40.5), rel=1e-14)
        assert b == pytest.approx(1.29e-18, rel=1e-2)
        assert b < 1e-17

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=5), rng.normal(size=5)
        assert prop1_bound(a, b, 0.7) == prop1_bound(b, a, 0.7)

    def test_identical_centers(self):
        o = GaussianMixtureOracle(np.zeros((2, 3)))
        mean, se = empirical_responsibility_mean(o, 0, 1, 1.0, n_samples=1000)
        assert mean == pytest.approx(0.5, abs=1e-15)

    def test_distance_two(self):
        o = GaussianMixtureOracle(np.array([[0.0, 0.0], [2.0, 0.0]]))
        mean, se = empirical_responsibility_mean(o, 0, 1, 1.0, n_samples=100_000, seed=3)
        bound = prop1_bound(o.centers[0], o.centers[1], 1.0)
        assert bound == pytest.approx(0.5 * math.exp(-0.5))
        assert mean <= bound + 3 * se

    def test_huge_sigma(self):
        o = GaussianMixtureOracle(np.array([[0.0, 0.0], [2.0, 0.0]]))
        mean, _ = empirical_responsibility_mean(o, 0, 1, 1e4, n_samples=1000)
        assert mean == pytest.approx(0.5, abs=1e-3)

    def test_same_index_rejected(self):
        o = GaussianMixtureOracle(np.zeros((2, 2)))
        with pytest.raises(InvalidInputError):
            empirical_responsibility_mean(o, 1, 1, 1.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 64), st.floats(0.0, 10.0), st.floats(0.05, 5.0), st.integers(0, 2**31))
    def test_bound_holds(self, dim, sep, sigma1, seed):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=dim)
        centers = np.stack([np.zeros(dim), sep * sigma1 * u / np.linalg.norm(u)])
        o = GaussianMixtureOracle(centers)
        mean, se = empirical_responsibility_mean(o, 0, 1, sigma1, n_samples=2000, seed=seed)
        assert mean <= prop1_bound(centers[0], centers[1], sigma1) + 3 * se + 1e-12
