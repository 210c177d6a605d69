"""Gaussian kernel, gram matrices, biased empirical MMD, and its U1 gradient.

The squared maximum mean discrepancy between sample sets Xs and Xt is
estimated with the biased V-statistic

    MMD^2 = (1/n_s^2) sum_ij k(xs_i, xs_j) + (1/n_t^2) sum_ij k(xt_i, xt_j)
            - (2 / n_s n_t) sum_ij k(xs_i, xt_j)

under the Gaussian kernel k(x, y) = exp(-||x - y||^2 / (2 s^2)). The
production path evaluates it as a trace over the joint gram matrix of the
stacked samples; the explicit double-sum lives in the tests as the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import as_matrix, check_finite
from .errors import ConfigError, DegenerateBandwidthError, ShapeError


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel bandwidth s and a record of where it came from."""

    bandwidth_s: float
    source: str = "explicit"

    def __post_init__(self):
        s = self.bandwidth_s
        if not (isinstance(s, (int, float)) and math.isfinite(s) and s > 0):
            raise ConfigError(f"bandwidth_s must be a positive finite real, got {s!r}")
        if self.source not in ("explicit", "median_heuristic"):
            raise ConfigError(f"unknown bandwidth source {self.source!r}")


def _as_samples(a, b, name_a: str, name_b: str):
    a = as_matrix(a, name_a)
    b = as_matrix(b, name_b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(
            f"{name_a} and {name_b} must share a feature dimension, got "
            f"{a.shape[1]} and {b.shape[1]}"
        )
    return a, b


def gaussian_kernel(x, y, cfg: KernelConfig) -> float:
    """k(x, y) = exp(-||x - y||^2 / (2 s^2)) for two 1-D vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError(f"vectors differ in dimension: {x.shape[0]} vs {y.shape[0]}")
    d2 = float(np.dot(x - y, x - y))
    return math.exp(-d2 / (2.0 * cfg.bandwidth_s**2))


def gram(a, b, cfg: KernelConfig) -> np.ndarray:
    """Gram matrix with entry (i, j) = gaussian_kernel(a_i, b_j, cfg)."""
    a, b = _as_samples(a, b, "a", "b")
    d2 = cdist(a, b, "sqeuclidean")
    return np.exp(-d2 / (2.0 * cfg.bandwidth_s**2))


def mmd_sq_biased(xs, xt, cfg: KernelConfig, clamp: bool = True) -> float:
    """Biased squared MMD via the joint-gram trace form.

    With K the gram matrix of the stacked samples [Xs; Xt] and L the
    coefficient matrix holding 1/n_s^2 on the source block, 1/n_t^2 on the
    target block and -1/(n_s n_t) on the cross blocks, the estimate is
    tr(K L); L is symmetric, so the trace reduces to sum(K * L). Rounding
    can push the value a hair below zero, so it is clamped to >= 0 unless
    ``clamp`` is False.
    """
    xs, xt = _as_samples(xs, xt, "xs", "xt")
    n_s, n_t = xs.shape[0], xt.shape[0]
    k = gram(np.vstack([xs, xt]), np.vstack([xs, xt]), cfg)
    l = np.empty((n_s + n_t, n_s + n_t))
    l[:n_s, :n_s] = 1.0 / n_s**2
    l[n_s:, n_s:] = 1.0 / n_t**2
    l[:n_s, n_s:] = -1.0 / (n_s * n_t)
    l[n_s:, :n_s] = -1.0 / (n_s * n_t)
    val = float(np.sum(k * l))
    if clamp:
        val = max(val, 0.0)
    return val


def median_heuristic_bandwidth(xs) -> KernelConfig:
    """Bandwidth s = sqrt(MSD / 2), MSD the median pairwise squared distance.

    The median over the n(n-1)/2 unordered source pairs is the lower median
    (sorted index (m - 1) // 2), which keeps the result an actual pair
    distance for even m. Fewer than two rows, or a zero median (at least
    half the pairs coincident), leaves the bandwidth undefined.
    """
    xs = as_matrix(xs, "xs")
    if xs.shape[0] < 2:
        raise DegenerateBandwidthError(
            f"need at least 2 samples for the median heuristic, got {xs.shape[0]}"
        )
    d2 = cdist(xs, xs, "sqeuclidean")
    pair_d2 = np.sort(d2[np.triu_indices_from(d2, k=1)])
    msd = float(pair_d2[(len(pair_d2) - 1) // 2])
    if msd <= 0.0:
        raise DegenerateBandwidthError(
            "median pairwise squared distance is 0 (samples coincide); "
            "bandwidth undefined"
        )
    return KernelConfig(bandwidth_s=math.sqrt(msd / 2.0), source="median_heuristic")


def _weighted_outer_sum(xa, xb, w):
    """sum_ij w_ij (xa_i - xb_j)(xa_i - xb_j)^T without forming the pairs."""
    row = w.sum(axis=1)
    col = w.sum(axis=0)
    return (
        (xa.T * row) @ xa
        + (xb.T * col) @ xb
        - xa.T @ w @ xb
        - xb.T @ w.T @ xa
    )


def mmd_sq_grad_u1(xs_aug, xt_aug, u1, cfg: KernelConfig) -> np.ndarray:
    """Gradient of the biased squared MMD of the projections X U1 w.r.t. U1.

    Samples are augmented (leading constant-1 entry) and the kernel is
    evaluated on the projected points. Each pair contributes
    -(1/s^2) k(u1^T x_i, u1^T x_j) (x_i - x_j)(x_i - x_j)^T u1, weighted
    1/n_s^2, 1/n_t^2 and -2/(n_s n_t) across the three pair blocks.
    """
    xs_aug, xt_aug = _as_samples(xs_aug, xt_aug, "xs_aug", "xt_aug")
    u1 = as_matrix(u1, "u1")
    if xs_aug.shape[1] != u1.shape[0]:
        raise ShapeError(
            f"u1 rows ({u1.shape[0]}) must match the augmented sample "
            f"dimension ({xs_aug.shape[1]})"
        )
    if not (np.all(xs_aug[:, 0] == 1.0) and np.all(xt_aug[:, 0] == 1.0)):
        raise ShapeError("samples must carry a leading constant-1 column")
    n_s, n_t = xs_aug.shape[0], xt_aug.shape[0]
    s2 = cfg.bandwidth_s**2
    qs = xs_aug @ u1
    qt = xt_aug @ u1
    w_ss = np.exp(-cdist(qs, qs, "sqeuclidean") / (2.0 * s2))
    w_tt = np.exp(-cdist(qt, qt, "sqeuclidean") / (2.0 * s2))
    w_st = np.exp(-cdist(qs, qt, "sqeuclidean") / (2.0 * s2))
    m = (
        _weighted_outer_sum(xs_aug, xs_aug, w_ss) / n_s**2
        + _weighted_outer_sum(xt_aug, xt_aug, w_tt) / n_t**2
        - 2.0 / (n_s * n_t) * _weighted_outer_sum(xs_aug, xt_aug, w_st)
    )
    return check_finite((-1.0 / s2) * (m @ u1), "mmd_sq_grad_u1")
