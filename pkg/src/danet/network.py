"""Single-hidden-layer feed-forward classifier.

Layout follows the augmented-parameter convention: U1 stacks the hidden
biases (row 0) on top of W1, U2 stacks the output biases on top of W2, and
inputs get a leading constant-1 column, so the forward pass is

    q = X~ U1,  h = softplus(q),  o = softmax(h~ U2)

with minibatch rows as samples. Dropout multiplies h by a 0/1 mask during
training (keep probability 1 - dropout_fraction) and scales h by
(1 - dropout_fraction) at inference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import RandomStream, as_matrix, augment, bernoulli_mask, check_finite, rand_uniform
from .errors import ConfigError, DataError, ShapeError

MODEL_HEADER = "danet-model v1"


@dataclass
class DannParams:
    """Weight matrices U1 (d+1, k) and U2 (k+1, l), biases in row 0."""

    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        self.u1 = as_matrix(self.u1, "u1")
        self.u2 = as_matrix(self.u2, "u2")
        if self.u2.shape[0] != self.u1.shape[1] + 1:
            raise ShapeError(
                f"u2 must have u1.cols + 1 rows, got u1 {self.u1.shape} "
                f"and u2 {self.u2.shape}"
            )

    @property
    def d(self) -> int:
        return self.u1.shape[0] - 1

    @property
    def k(self) -> int:
        return self.u1.shape[1]

    @property
    def l(self) -> int:
        return self.u2.shape[1]


@dataclass
class Velocity:
    """Momentum buffers shaped like the parameter matrices."""

    v_u1: np.ndarray
    v_u2: np.ndarray

    @classmethod
    def zeros_like(cls, params: DannParams) -> "Velocity":
        return cls(np.zeros_like(params.u1), np.zeros_like(params.u2))


@dataclass
class ForwardCache:
    """Per-batch forward intermediates consumed by backward.

    ``h`` holds the hidden activations as actually fed to the output layer,
    i.e. after the dropout mask or inference scaling was applied.
    """

    q: np.ndarray
    h: np.ndarray
    o: np.ndarray
    dropout_mask: np.ndarray | None = None


def init_u1(stream: RandomStream, d: int, k: int) -> np.ndarray:
    """Uniform init on [-r, r], r = sqrt(6 / (fan_in + fan_out))."""
    r = math.sqrt(6.0 / (d + k))
    return rand_uniform(stream, d + 1, k, -r, r)


def init_u2(stream: RandomStream, k: int, l: int) -> np.ndarray:
    r = math.sqrt(6.0 / (k + l))
    return rand_uniform(stream, k + 1, l, -r, r)


def softplus(u) -> np.ndarray:
    """Elementwise log(1 + exp(u)), overflow-safe for large |u|."""
    u = np.asarray(u, dtype=np.float64)
    return np.logaddexp(0.0, u)


def softmax(v) -> np.ndarray:
    """Rowwise exp-normalization with max-subtraction for stability."""
    v = as_matrix(v, "v")
    z = v - v.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(
    params: DannParams,
    x,
    dropout_fraction: float = 0.0,
    train: bool = False,
    stream: RandomStream | None = None,
    dropout_mask: np.ndarray | None = None,
) -> ForwardCache:
    """Run the network on a batch; rows of ``x`` are unaugmented samples.

    Training mode draws a fresh dropout mask from ``stream`` (or uses the
    explicit ``dropout_mask``, which tests rely on for reproducible
    gradients); inference mode instead scales h by (1 - dropout_fraction).
    """
    x = as_matrix(x, "x")
    if x.shape[1] != params.d:
        raise ShapeError(f"x has {x.shape[1]} features, model expects {params.d}")
    if not (0.0 <= dropout_fraction < 1.0):
        raise ConfigError(f"dropout_fraction must lie in [0, 1), got {dropout_fraction}")
    q = augment(x) @ params.u1
    h = softplus(q)
    mask = None
    if dropout_mask is not None:
        mask = as_matrix(dropout_mask, "dropout_mask")
        if mask.shape != h.shape:
            raise ShapeError(f"dropout_mask shape {mask.shape} != hidden shape {h.shape}")
        h = h * mask
    elif train and dropout_fraction > 0.0:
        if stream is None:
            raise ConfigError("training with dropout needs a RandomStream")
        mask = bernoulli_mask(stream, h.shape[0], h.shape[1], 1.0 - dropout_fraction)
        h = h * mask
    elif dropout_fraction > 0.0:
        h = h * (1.0 - dropout_fraction)
    o = softmax(augment(h) @ params.u2)
    return ForwardCache(q=q, h=h, o=o, dropout_mask=mask)


def nll_loss(o, y) -> float:
    """Mean negative log-likelihood -(1/n) sum_ik Y_ik log(o_ik).

    Probabilities are floored at 1e-300 inside the log so a zero at a true
    class yields a large finite loss instead of -Inf.
    """
    o = as_matrix(o, "o")
    y = as_matrix(y, "y")
    if o.shape != y.shape:
        raise ShapeError(f"o shape {o.shape} != y shape {y.shape}")
    return float(-np.sum(y * np.log(np.maximum(o, 1e-300))) / o.shape[0])


def l2_penalty(params: DannParams, l2: float) -> float:
    """(l2/2)(||W1||^2 + ||W2||^2); bias rows are not regularized."""
    return 0.5 * l2 * (
        float(np.sum(params.u1[1:] ** 2)) + float(np.sum(params.u2[1:] ** 2))
    )


def backward(params: DannParams, cache: ForwardCache, x, y, l2: float = 0.0):
    """Gradients of nll_loss + l2_penalty w.r.t. (U1, U2) for the batch.

    The softmax/cross-entropy pair collapses to (o - Y)/n at the output;
    the dropout mask from the cache gates the hidden backward path; the
    softplus derivative is the logistic function of q.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    n = x.shape[0]
    delta_o = (cache.o - y) / n
    g_u2 = augment(cache.h).T @ delta_o
    g_u2[1:] += l2 * params.u2[1:]
    dh = delta_o @ params.u2[1:].T
    if cache.dropout_mask is not None:
        dh = dh * cache.dropout_mask
    dq = dh * expit(cache.q)
    g_u1 = augment(x).T @ dq
    g_u1[1:] += l2 * params.u1[1:]
    check_finite(g_u1, "backward g_u1")
    check_finite(g_u2, "backward g_u2")
    return g_u1, g_u2


def sgd_momentum_step(
    params: DannParams,
    velocity: Velocity,
    gradients,
    lr: float,
    momentum: float,
):
    """v <- momentum v - lr g; param <- param + v. Returns new values."""
    g_u1, g_u2 = gradients
    v_u1 = momentum * velocity.v_u1 - lr * g_u1
    v_u2 = momentum * velocity.v_u2 - lr * g_u2
    new = DannParams(params.u1 + v_u1, params.u2 + v_u2)
    return new, Velocity(v_u1, v_u2)


def predict(params: DannParams, x, dropout_fraction: float = 0.0) -> np.ndarray:
    """Most probable class per row; ties resolve to the lowest index.

    ``dropout_fraction`` applies the inference-time hidden scaling of a
    dropout-trained model; it can shift decisions through the bias terms,
    so callers evaluating such a model should pass the training fraction.
    """
    cache = forward(params, x, dropout_fraction=dropout_fraction, train=False)
    return np.argmax(cache.o, axis=1)


def print_model(params: DannParams) -> str:
    """Serialize to the versioned plain-text format (bit-exact round-trip)."""
    lines = [MODEL_HEADER, f"{params.d} {params.k} {params.l}"]
    for matrix in (params.u1, params.u2):
        for row in matrix:
            # repr of a Python float is the shortest digit string that
            # round-trips; numpy scalar reprs do not parse back, so convert
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> DannParams:
    """Inverse of print_model; rejects malformed or truncated input."""
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_HEADER:
        raise DataError(f"expected header {MODEL_HEADER!r}")
    try:
        d, k, l = (int(tok) for tok in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise DataError(f"bad dimension line: {exc}") from exc
    if d < 1 or k < 1 or l < 1:
        raise DataError(f"dimensions must be positive, got d={d} k={k} l={l}")
    expected = 2 + (d + 1) + (k + 1)
    body = [ln for ln in lines[2:] if ln.strip()]
    if len(lines[2:]) and len(body) != len(lines[2:]):
        raise DataError("blank line inside model body")
    if 2 + len(body) != expected:
        raise DataError(f"expected {expected - 2} weight rows, got {len(body)}")

    def rows(chunk, cols, name):
        out = []
        for ln in chunk:
            vals = ln.split()
            if len(vals) != cols:
                raise DataError(f"{name}: expected {cols} values per row, got {len(vals)}")
            try:
                out.append([float(v) for v in vals])
            except ValueError as exc:
                raise DataError(f"{name}: bad float: {exc}") from exc
        arr = np.array(out)
        if not np.isfinite(arr).all():
            raise DataError(f"{name}: non-finite entry")
        return arr

    u1 = rows(body[: d + 1], k, "u1")
    u2 = rows(body[d + 1 :], l, "u2")
    return DannParams(u1, u2)
