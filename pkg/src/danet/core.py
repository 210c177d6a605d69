"""Dense float64 matrix primitives and a seeded deterministic random stream.

A "matrix" throughout this package is a 2-D C-contiguous ``numpy.ndarray``
of float64. The helpers here validate shapes eagerly and reject non-finite
results instead of letting NaN/Inf propagate silently. There is no implicit
broadcasting across public operations.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NonFiniteError, ShapeError

_MASK = (1 << 64) - 1
_MIX_MUL = 0x9E3779B97F4A7C15  # 64-bit golden-ratio increment (splitmix64)
_MIX_ADD = 0x632BE59BD9B4E019


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array and check every entry is finite."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected a 2-D matrix, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ShapeError(f"{name}: matrix must have at least one row and column")
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{name}: matrix contains NaN or Inf entries")
    return arr


def check_finite(arr: np.ndarray, context: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{context}: result contains NaN or Inf entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Standard matrix product with eager shape validation."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions differ ({a.shape[0]}x{a.shape[1]} by "
            f"{b.shape[0]}x{b.shape[1]})"
        )
    return check_finite(a @ b, "matmul")


def transpose(a) -> np.ndarray:
    a = as_matrix(a, "a")
    return np.ascontiguousarray(a.T)


def map_elementwise(a, f) -> np.ndarray:
    """Apply a scalar function to every entry; rejects non-finite outputs."""
    a = as_matrix(a, "a")
    out = np.vectorize(f, otypes=[np.float64])(a)
    return check_finite(out, "map_elementwise")


def augment(x) -> np.ndarray:
    """Prepend a constant-1 column so bias rows fold into weight matrices."""
    x = as_matrix(x, "x")
    return np.hstack([np.ones((x.shape[0], 1)), x])


class RandomStream:
    """Deterministic random source backed by numpy's PCG64 generator.

    PCG64 is a fixed, well-documented algorithm, so an identical seed yields
    an identical draw sequence on every platform. A stream is single-owner:
    never share one between concurrent consumers; derive independent child
    streams with :meth:`child` instead.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, tag: int) -> "RandomStream":
        """Fork an independent stream via a splitmix64-style seed mix."""
        mixed = (self.seed * _MIX_MUL + (int(tag) + 1) * _MIX_ADD) & _MASK
        return RandomStream(mixed)

    def uniform(self, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
        return self._gen.uniform(lo, hi, size=(rows, cols))

    def mask(self, rows: int, cols: int, p_keep: float) -> np.ndarray:
        return (self._gen.random(size=(rows, cols)) < p_keep).astype(np.float64)

    def normal(self, rows: int, cols: int) -> np.ndarray:
        return self._gen.standard_normal(size=(rows, cols))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def _check_dims(rows: int, cols: int) -> tuple[int, int]:
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise ConfigError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return rows, cols


def rand_uniform(stream: RandomStream, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
    """Matrix of i.i.d. uniform draws on [lo, hi); deterministic per seed."""
    rows, cols = _check_dims(rows, cols)
    if not (lo < hi):
        raise ConfigError(f"rand_uniform: need lo < hi, got lo={lo}, hi={hi}")
    return stream.uniform(rows, cols, lo, hi)


def bernoulli_mask(stream: RandomStream, rows: int, cols: int, p_keep: float) -> np.ndarray:
    """0/1 matrix whose entries are independently 1 with probability p_keep."""
    rows, cols = _check_dims(rows, cols)
    if not (0.0 <= p_keep <= 1.0):
        raise ConfigError(f"bernoulli_mask: p_keep must lie in [0, 1], got {p_keep}")
    return stream.mask(rows, cols, p_keep)
