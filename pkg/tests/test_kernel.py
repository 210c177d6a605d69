"""Gaussian kernel, MMD estimator, bandwidth heuristic, and MMD gradient."""

import math

import numpy as np
import pytest

from danet.errors import ConfigError, DegenerateBandwidthError, ShapeError
from danet.kernel import (
    KernelConfig,
    gaussian_kernel,
    gram,
    median_heuristic_bandwidth,
    mmd_sq_biased,
    mmd_sq_grad_u1,
)


def kernel_oracle(x, y, s):
    """Scalar-loop Gaussian kernel, independent of the production path."""
    d2 = 0.0
    for a, b in zip(x, y):
        d2 += (a - b) ** 2
    return math.exp(-d2 / (2.0 * s * s))


def mmd_sq_oracle(xs, xt, s):
    """Explicit double-sum estimate; the reference for the trace path."""
    n_s, n_t = len(xs), len(xt)
    ss = sum(kernel_oracle(xs[i], xs[j], s) for i in range(n_s) for j in range(n_s))
    tt = sum(kernel_oracle(xt[i], xt[j], s) for i in range(n_t) for j in range(n_t))
    st = sum(kernel_oracle(xs[i], xt[j], s) for i in range(n_s) for j in range(n_t))
    return ss / n_s**2 + tt / n_t**2 - 2.0 * st / (n_s * n_t)


def fd_grad(f, x, h=1e-5):
    """Central finite differences of a scalar function of a matrix."""
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rel_err(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


class TestKernelConfig:
    def test_rejects_nonpositive_bandwidth(self):
        for bad in (0.0, -1.0, float("inf"), float("nan")):
            with pytest.raises(ConfigError):
                KernelConfig(bandwidth_s=bad)

    def test_rejects_unknown_source(self):
        with pytest.raises(ConfigError):
            KernelConfig(bandwidth_s=1.0, source="guess")


class TestGaussianKernel:
    def test_zero_distance(self):
        cfg = KernelConfig(bandwidth_s=0.7)
        assert gaussian_kernel([1.0, 2.0], [1.0, 2.0], cfg) == 1.0

    def test_analytic_point(self):
        # ||x - y||^2 = 2 s^2 puts the kernel exactly at exp(-1)
        cfg = KernelConfig(bandwidth_s=1.0)
        k = gaussian_kernel([0.0], [math.sqrt(2.0)], cfg)
        assert abs(k - math.exp(-1.0)) < 1e-12

    def test_against_distance_oracle(self):
        rng = np.random.default_rng(11)
        cfg = KernelConfig(bandwidth_s=1.3)
        x, y = rng.normal(size=5), rng.normal(size=5)
        assert abs(gaussian_kernel(x, y, cfg) - kernel_oracle(x, y, 1.3)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            gaussian_kernel([1.0], [1.0, 2.0], KernelConfig(bandwidth_s=1.0))


class TestGram:
    def test_unit_diagonal(self):
        rng = np.random.default_rng(12)
        a = rng.normal(size=(6, 3))
        k = gram(a, a, KernelConfig(bandwidth_s=0.9))
        assert np.array_equal(np.diag(k), np.ones(6))

    def test_symmetry(self):
        rng = np.random.default_rng(13)
        a, b = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
        cfg = KernelConfig(bandwidth_s=1.1)
        assert np.array_equal(gram(a, b, cfg), gram(b, a, cfg).T)

    def test_against_per_entry_oracle(self):
        rng = np.random.default_rng(14)
        a, b = rng.normal(size=(6, 4)), rng.normal(size=(5, 4))
        k = gram(a, b, KernelConfig(bandwidth_s=0.8))
        for i in range(6):
            for j in range(5):
                assert abs(k[i, j] - kernel_oracle(a[i], b[j], 0.8)) < 1e-12

    def test_entries_in_unit_interval(self):
        rng = np.random.default_rng(15)
        a = rng.normal(size=(8, 2))
        k = gram(a, a, KernelConfig(bandwidth_s=0.5))
        assert np.all(k > 0.0) and np.all(k <= 1.0)

    def test_monotone_in_bandwidth(self):
        x, y = np.array([[0.0, 0.0]]), np.array([[1.0, 2.0]])
        vals = [gram(x, y, KernelConfig(bandwidth_s=s))[0, 0] for s in (0.5, 1.0, 2.0, 4.0)]
        assert all(lo < hi for lo, hi in zip(vals, vals[1:]))


class TestMmdSqBiased:
    def test_identical_sets(self):
        rng = np.random.default_rng(16)
        xs = rng.normal(size=(7, 3))
        cfg = KernelConfig(bandwidth_s=1.0)
        assert mmd_sq_biased(xs, xs.copy(), cfg) < 1e-12
        assert abs(mmd_sq_biased(xs, xs.copy(), cfg, clamp=False)) < 1e-12

    def test_single_pair_closed_form(self):
        cfg = KernelConfig(bandwidth_s=0.9)
        x, y = np.array([[0.3, -1.2]]), np.array([[1.0, 0.4]])
        want = 2.0 - 2.0 * gaussian_kernel(x[0], y[0], cfg)
        assert abs(mmd_sq_biased(x, y, cfg) - want) < 1e-12

    def test_against_double_sum_oracle(self):
        rng = np.random.default_rng(17)
        xs, xt = rng.normal(size=(8, 4)), rng.normal(size=(7, 4)) + 0.5
        cfg = KernelConfig(bandwidth_s=1.2)
        assert abs(mmd_sq_biased(xs, xt, cfg) - mmd_sq_oracle(xs, xt, 1.2)) < 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(18)
        xs, xt = rng.normal(size=(6, 3)), rng.normal(size=(9, 3)) + 1.0
        cfg = KernelConfig(bandwidth_s=0.8)
        assert abs(mmd_sq_biased(xs, xt, cfg) - mmd_sq_biased(xt, xs, cfg)) < 1e-12

    def test_preclamp_never_meaningfully_negative(self):
        cfg = KernelConfig(bandwidth_s=1.0)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n_s, n_t = rng.integers(1, 10, size=2)
            xs = rng.normal(size=(n_s, 3))
            xt = rng.normal(size=(n_t, 3))
            assert mmd_sq_biased(xs, xt, cfg, clamp=False) >= -1e-12
            assert mmd_sq_biased(xs, xt, cfg) >= 0.0

    def test_empty_set_rejected(self):
        cfg = KernelConfig(bandwidth_s=1.0)
        with pytest.raises(ShapeError):
            mmd_sq_biased(np.ones((0, 3)), np.ones((2, 3)), cfg)

    def test_feature_mismatch_rejected(self):
        cfg = KernelConfig(bandwidth_s=1.0)
        with pytest.raises(ShapeError):
            mmd_sq_biased(np.ones((2, 3)), np.ones((2, 4)), cfg)


class TestMedianHeuristicBandwidth:
    def test_two_points(self):
        cfg = median_heuristic_bandwidth([[0.0], [2.0]])
        assert cfg.bandwidth_s == math.sqrt(2.0)
        assert cfg.source == "median_heuristic"

    def test_three_points_hand_enumeration(self):
        # pair squared distances {1, 4, 9}; median 4; s = sqrt(4 / 2)
        cfg = median_heuristic_bandwidth([[0.0], [1.0], [3.0]])
        assert cfg.bandwidth_s == math.sqrt(2.0)

    def test_even_pair_count_uses_lower_median(self):
        # pairs of {0,1,2,4}: sorted sq-dists [1,1,4,4,9,16]; lower median 4
        cfg = median_heuristic_bandwidth([[0.0], [1.0], [2.0], [4.0]])
        assert cfg.bandwidth_s == math.sqrt(2.0)

    def test_single_row_rejected(self):
        with pytest.raises(DegenerateBandwidthError):
            median_heuristic_bandwidth([[1.0, 2.0]])

    def test_coincident_rows_rejected(self):
        with pytest.raises(DegenerateBandwidthError):
            median_heuristic_bandwidth([[3.0, 3.0], [3.0, 3.0], [3.0, 3.0]])


class TestMmdSqGradU1:
    @staticmethod
    def _instance(rng, n_s, n_t, d, k):
        xs = np.hstack([np.ones((n_s, 1)), rng.normal(size=(n_s, d))])
        xt = np.hstack([np.ones((n_t, 1)), rng.normal(size=(n_t, d)) + 0.3])
        u1 = rng.normal(size=(d + 1, k)) * 0.5
        return xs, xt, u1

    def test_identical_sets_zero(self):
        rng = np.random.default_rng(19)
        xs, _, u1 = self._instance(rng, 6, 6, 3, 4)
        g = mmd_sq_grad_u1(xs, xs.copy(), u1, KernelConfig(bandwidth_s=1.0))
        assert np.max(np.abs(g)) < 1e-12

    def test_single_pair_closed_form(self):
        rng = np.random.default_rng(20)
        xs, xt, u1 = self._instance(rng, 1, 1, 4, 3)
        cfg = KernelConfig(bandwidth_s=1.1)
        s2 = cfg.bandwidth_s**2
        diff = (xs[0] - xt[0]).reshape(-1, 1)
        k_val = gaussian_kernel(xs[0] @ u1, xt[0] @ u1, cfg)
        g_st = -(1.0 / s2) * k_val * (diff @ diff.T) @ u1
        want = -2.0 * g_st
        got = mmd_sq_grad_u1(xs, xt, u1, cfg)
        assert rel_err(got, want) < 1e-12

    def test_bias_row_vanishes(self):
        rng = np.random.default_rng(21)
        xs, xt, u1 = self._instance(rng, 5, 7, 4, 3)
        g = mmd_sq_grad_u1(xs, xt, u1, KernelConfig(bandwidth_s=0.9))
        assert np.max(np.abs(g[0, :])) < 1e-12 * max(np.linalg.norm(g), 1.0)

    def test_matches_finite_differences_20_seeds(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            xs, xt, u1 = self._instance(rng, 5, 6, 4, 3)
            cfg = KernelConfig(bandwidth_s=0.8 + 0.1 * (seed % 5))
            got = mmd_sq_grad_u1(xs, xt, u1, cfg)
            want = fd_grad(
                lambda u: mmd_sq_biased(xs @ u, xt @ u, cfg, clamp=False), u1
            )
            assert rel_err(got, want) < 1e-6

    def test_shape_mismatch_rejected(self):
        cfg = KernelConfig(bandwidth_s=1.0)
        xs = np.hstack([np.ones((3, 1)), np.zeros((3, 2))])
        with pytest.raises(ShapeError):
            mmd_sq_grad_u1(xs, xs, np.ones((4, 2)), cfg)

    def test_unaugmented_samples_rejected(self):
        cfg = KernelConfig(bandwidth_s=1.0)
        rng = np.random.default_rng(22)
        xs = rng.normal(size=(3, 3))
        with pytest.raises(ShapeError):
            mmd_sq_grad_u1(xs, xs, np.ones((3, 2)), cfg)
