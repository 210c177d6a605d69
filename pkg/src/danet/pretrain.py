"""Denoising auto-encoder pretraining for the first-layer weights.

The encoder mirrors the supervised hidden layer (softplus of an affine map)
so transplanted weights operate in the same regime; the decoder is a linear
affine head with untied weights, and the loss is mean squared reconstruction
error, which suits z-scored (unbounded) inputs. Corruption is pure
zero-masking: entries drop to 0, survivors are not rescaled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import RandomStream, as_matrix, bernoulli_mask, rand_uniform
from .errors import ConfigError, DataError, NonFiniteError, ShapeError
from .network import softplus

DAE_HEADER = "danet-dae v1"


@dataclass
class DaeParams:
    """Encoder (W_enc, b_enc) and untied decoder (W_dec, b_dec)."""

    w_enc: np.ndarray
    b_enc: np.ndarray
    w_dec: np.ndarray
    b_dec: np.ndarray

    def __post_init__(self):
        self.w_enc = as_matrix(self.w_enc, "w_enc")
        self.w_dec = as_matrix(self.w_dec, "w_dec")
        self.b_enc = np.asarray(self.b_enc, dtype=np.float64).ravel()
        self.b_dec = np.asarray(self.b_dec, dtype=np.float64).ravel()
        d, k = self.w_enc.shape
        if self.w_dec.shape != (k, d):
            raise ShapeError(
                f"w_dec must be {k}x{d} for a {d}x{k} encoder, got {self.w_dec.shape}"
            )
        if len(self.b_enc) != k or len(self.b_dec) != d:
            raise ShapeError("bias lengths must match layer widths")
        if not (np.isfinite(self.b_enc).all() and np.isfinite(self.b_dec).all()):
            raise NonFiniteError("bias contains NaN or Inf")

    @property
    def d(self) -> int:
        return self.w_enc.shape[0]

    @property
    def k(self) -> int:
        return self.w_enc.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Input corruption: zero-masking with the given destruction fraction."""

    kind: str = "zero_masking"
    destruction_fraction: float = 0.3

    def __post_init__(self):
        if self.kind != "zero_masking":
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if not (0.0 <= self.destruction_fraction <= 1.0):
            raise ConfigError(
                f"destruction_fraction must lie in [0, 1], got {self.destruction_fraction}"
            )


@dataclass(frozen=True)
class DaeTrainConfig:
    lr: float = 0.02
    epochs: int = 200
    batch_size: int = 20
    hidden: int = 256

    def __post_init__(self):
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1, got {self.hidden}")


@dataclass
class DaeResult:
    params: DaeParams
    epoch_losses: list


def corrupt(x, spec: NoiseSpec, stream: RandomStream) -> np.ndarray:
    """Zero each entry independently with probability destruction_fraction."""
    x = as_matrix(x, "x")
    if spec.destruction_fraction == 0.0:
        return x
    mask = bernoulli_mask(stream, x.shape[0], x.shape[1], 1.0 - spec.destruction_fraction)
    return x * mask


def init_dae_params(stream: RandomStream, d: int, k: int) -> DaeParams:
    """Uniform [-r, r] draws per layer, r = sqrt(6 / (fan_in + fan_out))."""
    r = math.sqrt(6.0 / (d + k))
    u_enc = rand_uniform(stream, d + 1, k, -r, r)
    u_dec = rand_uniform(stream, k + 1, d, -r, r)
    return DaeParams(
        w_enc=u_enc[1:], b_enc=u_enc[0], w_dec=u_dec[1:], b_dec=u_dec[0]
    )


def dae_forward(params: DaeParams, x_corrupt):
    """(hidden, reconstruction) of a corrupted batch."""
    xc = as_matrix(x_corrupt, "x_corrupt")
    if xc.shape[1] != params.d:
        raise ShapeError(f"input has {xc.shape[1]} features, encoder expects {params.d}")
    hidden = softplus(xc @ params.w_enc + params.b_enc)
    reconstruction = hidden @ params.w_dec + params.b_dec
    return hidden, reconstruction


def dae_loss(params: DaeParams, x_corrupt, x_clean) -> float:
    """(1/n) sum_i ||x_i - reconstruction_i||^2."""
    x = as_matrix(x_clean, "x_clean")
    _, recon = dae_forward(params, x_corrupt)
    return float(np.sum((recon - x) ** 2) / x.shape[0])


def dae_grads(params: DaeParams, x_corrupt, x_clean):
    """Gradients of dae_loss in field order (w_enc, b_enc, w_dec, b_dec)."""
    xc = as_matrix(x_corrupt, "x_corrupt")
    x = as_matrix(x_clean, "x_clean")
    n = x.shape[0]
    q = xc @ params.w_enc + params.b_enc
    hidden = softplus(q)
    recon = hidden @ params.w_dec + params.b_dec
    dr = 2.0 * (recon - x) / n
    g_w_dec = hidden.T @ dr
    g_b_dec = dr.sum(axis=0)
    dq = (dr @ params.w_dec.T) * expit(q)
    g_w_enc = xc.T @ dq
    g_b_enc = dq.sum(axis=0)
    return g_w_enc, g_b_enc, g_w_dec, g_b_dec


def dae_train(x_unlabeled, spec: NoiseSpec, cfg: DaeTrainConfig, stream: RandomStream) -> DaeResult:
    """Mini-batch plain SGD on the reconstruction loss.

    Every batch presentation draws a fresh corruption mask from the stream,
    so repeated epochs see different corruptions of the same samples. The
    reported per-epoch loss is the mean of the minibatch training losses.
    """
    x = as_matrix(x_unlabeled, "x_unlabeled")
    params = init_dae_params(stream, x.shape[1], cfg.hidden)
    n = x.shape[0]
    losses = []
    for epoch in range(cfg.epochs):
        try:
            order = stream.permutation(n)
            batch_losses = []
            # divergence shows up as Inf inside the batch math before the
            # finite check below can see it; keep numpy quiet meanwhile
            with np.errstate(over="ignore", invalid="ignore"):
                for start in range(0, n, cfg.batch_size):
                    idx = order[start : start + cfg.batch_size]
                    xb = x[idx]
                    xb_corrupt = corrupt(xb, spec, stream)
                    batch_losses.append(dae_loss(params, xb_corrupt, xb))
                    g_w_enc, g_b_enc, g_w_dec, g_b_dec = dae_grads(params, xb_corrupt, xb)
                    params = DaeParams(
                        w_enc=params.w_enc - cfg.lr * g_w_enc,
                        b_enc=params.b_enc - cfg.lr * g_b_enc,
                        w_dec=params.w_dec - cfg.lr * g_w_dec,
                        b_dec=params.b_dec - cfg.lr * g_b_dec,
                    )
            epoch_loss = float(np.mean(batch_losses))
            if not math.isfinite(epoch_loss):
                raise NonFiniteError("loss is non-finite")
        except NonFiniteError as exc:
            raise NonFiniteError(f"pretraining diverged at epoch {epoch + 1}: {exc}") from exc
        losses.append(epoch_loss)
    return DaeResult(params=params, epoch_losses=losses)


def init_from_dae(dae: DaeParams, d: int | None = None, k: int | None = None) -> np.ndarray:
    """U1 initializer: encoder bias as row 0, encoder weights below."""
    if d is not None and dae.d != d:
        raise ShapeError(f"encoder expects {dae.d} inputs, network has {d}")
    if k is not None and dae.k != k:
        raise ShapeError(f"encoder has {dae.k} hidden units, network has {k}")
    return np.vstack([dae.b_enc, dae.w_enc])


def print_dae(dae: DaeParams) -> str:
    """Serialize the pretrained encoder in the versioned text format."""
    u1 = init_from_dae(dae)
    lines = [DAE_HEADER, f"{dae.d} {dae.k}"]
    for row in u1:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_dae(text: str) -> np.ndarray:
    """Read a pretrained-encoder file back as a U1 initializer matrix."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != DAE_HEADER:
        raise DataError(f"expected header {DAE_HEADER!r}")
    try:
        d, k = (int(tok) for tok in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise DataError(f"bad dimension line: {exc}") from exc
    if d < 1 or k < 1:
        raise DataError(f"dimensions must be positive, got d={d} k={k}")
    body = lines[2:]
    if len(body) != d + 1:
        raise DataError(f"expected {d + 1} encoder rows, got {len(body)}")
    rows = []
    for ln in body:
        vals = ln.split()
        if len(vals) != k:
            raise DataError(f"expected {k} values per row, got {len(vals)}")
        try:
            rows.append([float(v) for v in vals])
        except ValueError as exc:
            raise DataError(f"bad float: {exc}") from exc
    u1 = np.array(rows)
    if not np.isfinite(u1).all():
        raise DataError("non-finite entry")
    return u1
