"""Dataset containers, CSV I/O, z-score normalization, synthetic shift task.

The CSV layout is plain comma-separated decimals, one sample per row, with
an optional header (auto-detected by a non-numeric first row) and, for
labeled files, a non-negative integer class label in the last column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RandomStream, as_matrix
from .errors import ConfigError, DataError, ShapeError


@dataclass
class Dataset:
    """Feature matrix plus optional integer labels and a domain tag."""

    features: np.ndarray
    labels: np.ndarray | None = None
    class_count: int = 0
    domain_tag: str = ""

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.ndim != 1 or len(self.labels) != self.n:
                raise DataError(
                    f"labels must be a length-{self.n} vector, got shape {self.labels.shape}"
                )
            if self.labels.min() < 0 or self.labels.max() >= self.class_count:
                raise DataError(
                    f"labels must lie in [0, {self.class_count}), got range "
                    f"[{self.labels.min()}, {self.labels.max()}]"
                )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class NormStats:
    """Per-dimension mean and population std (floored at 1e-8)."""

    mean: np.ndarray
    std: np.ndarray


def _is_numeric_row(tokens) -> bool:
    try:
        for tok in tokens:
            float(tok)
    except ValueError:
        return False
    return True


def load_csv(path, has_labels: bool) -> Dataset:
    """Read a dataset; `has_labels` takes the last column as class labels."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    rows = [(i + 1, line.split(",")) for i, line in enumerate(raw) if line.strip()]
    if rows and not _is_numeric_row(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0][1])
    feats, labels = [], []
    for lineno, tokens in rows:
        if len(tokens) != width:
            raise DataError(
                f"{path}: ragged row at line {lineno} "
                f"({len(tokens)} columns, expected {width})"
            )
        try:
            vals = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise DataError(f"{path}: parse failure at line {lineno}: {exc}") from exc
        if has_labels:
            lab = vals[-1]
            if not (lab >= 0 and float(lab).is_integer()):
                raise DataError(
                    f"{path}: non-integer label {tokens[-1]!r} at line {lineno}"
                )
            labels.append(int(lab))
            vals = vals[:-1]
        feats.append(vals)
    if has_labels and width < 2:
        raise DataError(f"{path}: labeled file needs at least one feature column")
    features = np.array(feats)
    if not np.isfinite(features).all():
        raise DataError(f"{path}: non-finite feature value")
    if has_labels:
        return Dataset(features, np.array(labels), class_count=max(labels) + 1)
    return Dataset(features)


def save_csv(ds: Dataset, path) -> None:
    """Write features (and labels, if present) at full decimal precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.features[i]]
            if ds.labels is not None:
                cells.append(str(int(ds.labels[i])))
            fh.write(",".join(cells) + "\n")


def zscore_fit(*datasets: Dataset) -> NormStats:
    """Per-dimension mean and population std over all given datasets."""
    if not datasets:
        raise ConfigError("zscore_fit needs at least one dataset")
    dims = {ds.d for ds in datasets}
    if len(dims) != 1:
        raise ShapeError(f"datasets disagree on feature dimension: {sorted(dims)}")
    stacked = np.vstack([ds.features for ds in datasets])
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), 1e-8)
    return NormStats(mean=mean, std=std)


def zscore_apply(ds: Dataset, stats: NormStats) -> Dataset:
    """(x - mean) / std per dimension; labels and tags pass through."""
    if ds.d != len(stats.mean):
        raise ShapeError(
            f"dataset has {ds.d} dimensions, stats were fit on {len(stats.mean)}"
        )
    feats = (ds.features - stats.mean) / stats.std
    return Dataset(feats, ds.labels, ds.class_count, ds.domain_tag)


def one_hot(labels, l: int) -> np.ndarray:
    """n x l matrix with a single 1 per row at the label's index."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= l):
        raise DataError(f"labels must lie in [0, {l})")
    y = np.zeros((len(labels), l))
    y[np.arange(len(labels)), labels] = 1.0
    return y


@dataclass(frozen=True)
class ShiftSpec:
    """Two-dimensional rotated/translated Gaussian-blob task description."""

    classes: int = 2
    per_class: int = 100
    spacing: float = 2.0
    angle_deg: float = 30.0
    translation: tuple = (1.5, 0.0)
    noise_std: float = 1.0

    def __post_init__(self):
        if self.classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.classes}")
        if self.per_class < 1:
            raise ConfigError(f"per_class must be positive, got {self.per_class}")
        if not (self.noise_std > 0 and math.isfinite(self.noise_std)):
            raise ConfigError(f"noise_std must be positive, got {self.noise_std}")
        if len(self.translation) != 2:
            raise ConfigError("translation must be a 2-vector")


def _class_centers(spec: ShiftSpec) -> np.ndarray:
    # regular polygon with adjacent centers `spacing` apart
    radius = spec.spacing / (2.0 * math.sin(math.pi / spec.classes))
    angles = 2.0 * math.pi * np.arange(spec.classes) / spec.classes
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def gen_synthetic_shift(spec: ShiftSpec, stream: RandomStream):
    """Draw (source, target): same class blobs, target rotated + translated.

    Source and target are independent draws of the same per-class Gaussians;
    every target point is then rotated by angle_deg about the origin and
    shifted by the translation vector, a pure covariate shift that preserves
    class-conditional structure. Target labels are for evaluation only.
    """
    centers = _class_centers(spec)
    theta = math.radians(spec.angle_deg)
    rot = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    trans = np.asarray(spec.translation, dtype=np.float64)

    def draw_blobs():
        feats = np.vstack(
            [
                centers[c] + spec.noise_std * stream.normal(spec.per_class, 2)
                for c in range(spec.classes)
            ]
        )
        labels = np.repeat(np.arange(spec.classes), spec.per_class)
        return feats, labels

    src_x, src_y = draw_blobs()
    tgt_x, tgt_y = draw_blobs()
    tgt_x = tgt_x @ rot.T + trans
    source = Dataset(src_x, src_y, spec.classes, domain_tag="source")
    target = Dataset(tgt_x, tgt_y, spec.classes, domain_tag="target")
    return source, target
