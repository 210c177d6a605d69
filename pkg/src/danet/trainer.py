"""Two-step training loop: supervised minibatch sweeps plus an MMD step.

Each iteration (epoch) first sweeps shuffled minibatches of the labeled
rows, updating both layers by momentum SGD on the cross-entropy loss with
L2 and dropout, then applies one full-batch plain gradient step

    U1 <- U1 - lr * gamma * d(MMD^2)/dU1

on the first layer only, with dropout inactive and the momentum buffer
untouched. The Gaussian-kernel bandwidth is fixed once before training by
the median heuristic on the source features. The plain classifier baseline
is the same loop with the MMD step absent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import RandomStream, augment
from .data import Dataset, one_hot
from .errors import ConfigError, DataError, NonFiniteError, ShapeError
from .kernel import median_heuristic_bandwidth, mmd_sq_biased, mmd_sq_grad_u1
from .network import (
    DannParams,
    Velocity,
    backward,
    forward,
    init_u1,
    init_u2,
    nll_loss,
    predict,
    sgd_momentum_step,
)
from .pretrain import DaeTrainConfig, NoiseSpec, dae_train, init_from_dae


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; the defaults are the standard setting."""

    lr: float = 0.02
    iterations: int = 900
    momentum: float = 0.05
    l2: float = 0.003
    dropout_fraction: float = 0.5
    gamma: float = 1e3
    hidden: int = 256
    batch_size: int = 20
    seed: int = 0
    pretraining: str = "none"
    setting: str = "unsupervised"
    dae_epochs: int = 200
    dae_lr: float = 0.02
    dae_noise: float = 0.3

    def __post_init__(self):
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}")
        if not (0.0 <= self.dropout_fraction < 1.0):
            raise ConfigError(
                f"dropout_fraction must lie in [0, 1), got {self.dropout_fraction}"
            )
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1, got {self.hidden}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.pretraining not in ("none", "dae"):
            raise ConfigError(f"unknown pretraining {self.pretraining!r}")
        if self.setting not in ("unsupervised", "semi_supervised"):
            raise ConfigError(f"unknown setting {self.setting!r}")
        if not (0.0 <= self.dae_noise <= 1.0):
            raise ConfigError(f"dae_noise must lie in [0, 1], got {self.dae_noise}")


@dataclass
class TrainReport:
    """Per-iteration trace plus the final held-out evaluation."""

    j_nns: list = field(default_factory=list)
    mmd_sq: list = field(default_factory=list)
    elapsed_ms: list = field(default_factory=list)
    final_accuracy: float | None = None
    seed: int = 0
    config: TrainConfig | None = None


# child-stream tags; fixed so pretraining toggles change nothing downstream
_TAG_U1, _TAG_U2, _TAG_LOOP, _TAG_DAE = 1, 2, 3, 4


def pretrain_stream(seed: int) -> RandomStream:
    """The stream the trainer hands to inline DAE pretraining.

    Exposed so a separate pretraining run writing an encoder file produces
    bitwise the same initializer as the inline path for the same seed.
    """
    return RandomStream(seed).child(_TAG_DAE)


def _supervised_rows(source: Dataset, target_labeled: Dataset | None, l: int):
    xs = [source.features]
    ys = [source.labels]
    if target_labeled is not None:
        xs.append(target_labeled.features)
        ys.append(target_labeled.labels)
    return np.vstack(xs), one_hot(np.concatenate(ys), l)


def _resolve_u1(cfg: TrainConfig, root: RandomStream, d: int, unlabeled, u1_init):
    if u1_init is not None:
        if cfg.pretraining == "dae":
            raise ConfigError("pass either u1_init or pretraining='dae', not both")
        u1 = np.asarray(u1_init, dtype=np.float64)
        if u1.shape != (d + 1, cfg.hidden):
            raise ShapeError(
                f"u1_init must be {(d + 1, cfg.hidden)}, got {u1.shape}"
            )
        return u1
    if cfg.pretraining == "dae":
        dae_cfg = DaeTrainConfig(
            lr=cfg.dae_lr,
            epochs=cfg.dae_epochs,
            batch_size=cfg.batch_size,
            hidden=cfg.hidden,
        )
        noise = NoiseSpec(destruction_fraction=cfg.dae_noise)
        result = dae_train(unlabeled, noise, dae_cfg, root.child(_TAG_DAE))
        return init_from_dae(result.params, d=d, k=cfg.hidden)
    return init_u1(root.child(_TAG_U1), d, cfg.hidden)


def _train(source, target, target_labeled, cfg, gamma, u1_init):
    if source.labels is None:
        raise DataError("source dataset must be labeled")
    if cfg.setting == "semi_supervised" and target_labeled is None:
        raise ConfigError("semi_supervised setting needs a labeled target dataset")
    if cfg.setting == "unsupervised" and target_labeled is not None:
        raise ConfigError("labeled target rows require setting='semi_supervised'")
    if target is not None and target.d != source.d:
        raise ShapeError(f"target has {target.d} features, source has {source.d}")
    if target_labeled is not None:
        if target_labeled.labels is None:
            raise DataError("target_labeled dataset must carry labels")
        if target_labeled.d != source.d:
            raise ShapeError("target_labeled feature dimension differs from source")
    if gamma > 0 and target is None:
        raise ConfigError("the MMD step needs target samples; pass a target dataset")

    l = source.class_count
    if target_labeled is not None:
        l = max(l, target_labeled.class_count)
    d = source.d

    kcfg = median_heuristic_bandwidth(source.features) if target is not None else None
    if target is not None:
        src_aug = augment(source.features)
        tgt_feats = target.features
        if target_labeled is not None:
            tgt_feats = np.vstack([tgt_feats, target_labeled.features])
        tgt_aug = augment(tgt_feats)
        unlabeled = np.vstack([source.features, tgt_feats])
    else:
        unlabeled = source.features

    root = RandomStream(cfg.seed)
    u1 = _resolve_u1(cfg, root, d, unlabeled, u1_init)
    u2 = init_u2(root.child(_TAG_U2), cfg.hidden, l)
    params = DannParams(u1, u2)
    velocity = Velocity.zeros_like(params)

    sup_x, sup_y = _supervised_rows(source, target_labeled, l)
    n_sup = sup_x.shape[0]
    loop = root.child(_TAG_LOOP)
    report = TrainReport(seed=cfg.seed, config=replace(cfg, gamma=gamma))

    for it in range(cfg.iterations):
        t0 = time.perf_counter()
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                order = loop.permutation(n_sup)
                batch_losses = []
                for start in range(0, n_sup, cfg.batch_size):
                    idx = order[start : start + cfg.batch_size]
                    xb, yb = sup_x[idx], sup_y[idx]
                    cache = forward(
                        params,
                        xb,
                        dropout_fraction=cfg.dropout_fraction,
                        train=True,
                        stream=loop,
                    )
                    batch_losses.append(nll_loss(cache.o, yb))
                    grads = backward(params, cache, xb, yb, l2=cfg.l2)
                    params, velocity = sgd_momentum_step(
                        params, velocity, grads, lr=cfg.lr, momentum=cfg.momentum
                    )
                if gamma > 0:
                    g_mmd = mmd_sq_grad_u1(src_aug, tgt_aug, params.u1, kcfg)
                    params = DannParams(params.u1 - cfg.lr * gamma * g_mmd, params.u2)
            j = float(np.mean(batch_losses))
            if not math.isfinite(j):
                raise NonFiniteError("supervised loss is non-finite")
            if target is not None:
                report.mmd_sq.append(
                    mmd_sq_biased(src_aug @ params.u1, tgt_aug @ params.u1, kcfg)
                )
        except NonFiniteError as exc:
            raise NonFiniteError(
                f"training diverged at iteration {it + 1}: {exc}"
            ) from exc
        report.j_nns.append(j)
        report.elapsed_ms.append((time.perf_counter() - t0) * 1000.0)

    if target is not None and target.labels is not None:
        report.final_accuracy = evaluate(
            params, target, dropout_fraction=cfg.dropout_fraction
        )
    return params, report


def train_dann(
    source: Dataset,
    target: Dataset,
    cfg: TrainConfig,
    target_labeled: Dataset | None = None,
    u1_init=None,
):
    """Full two-step training with the MMD weight gamma from the config."""
    return _train(source, target, target_labeled, cfg, cfg.gamma, u1_init)


def train_nn(
    source: Dataset,
    target: Dataset | None = None,
    cfg: TrainConfig = None,
    target_labeled: Dataset | None = None,
    u1_init=None,
):
    """Baseline without the MMD step; identical loop otherwise.

    ``target`` is optional and, when given, is used only to report the
    per-iteration MMD and final accuracy; it never influences the updates.
    """
    return _train(source, target, target_labeled, cfg, 0.0, u1_init)


def evaluate(params: DannParams, test: Dataset, dropout_fraction: float = 0.0) -> float:
    """Fraction of rows whose predicted class matches the label."""
    if test is None:
        raise DataError("empty test set")
    if test.labels is None:
        raise DataError("evaluation needs a labeled dataset")
    preds = predict(params, test.features, dropout_fraction=dropout_fraction)
    return float(np.mean(preds == test.labels))


def semi_supervised_select(target_pool: Dataset, per_class: int = 3):
    """Split off the first per_class rows of each class, in dataset order.

    Returns (selected, remainder); the remainder is the evaluation pool and
    shares no rows with the selection. A pool consumed entirely by the
    selection yields remainder None.
    """
    if target_pool.labels is None:
        raise DataError("semi-supervised selection needs a labeled target pool")
    if per_class < 1:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")
    chosen = []
    for c in range(target_pool.class_count):
        idx = np.flatnonzero(target_pool.labels == c)
        if len(idx) < per_class:
            raise DataError(
                f"class {c} has {len(idx)} rows, need at least {per_class}"
            )
        chosen.extend(idx[:per_class])
    chosen = np.sort(np.array(chosen))
    rest = np.setdiff1d(np.arange(target_pool.n), chosen)
    selected = Dataset(
        target_pool.features[chosen],
        target_pool.labels[chosen],
        target_pool.class_count,
        target_pool.domain_tag,
    )
    if len(rest) == 0:
        return selected, None
    remainder = Dataset(
        target_pool.features[rest],
        target_pool.labels[rest],
        target_pool.class_count,
        target_pool.domain_tag,
    )
    return selected, remainder


def report_to_csv(report: TrainReport) -> str:
    """Line-oriented report: one row per iteration plus a summary record."""
    lines = ["iter,j_nns,mmd_sq,elapsed_ms"]
    for i, j in enumerate(report.j_nns):
        mmd = f"{report.mmd_sq[i]:.17g}" if report.mmd_sq else ""
        lines.append(f"{i + 1},{j:.17g},{mmd},{report.elapsed_ms[i]:.3f}")
    acc = "" if report.final_accuracy is None else f"{report.final_accuracy:.17g}"
    gamma = report.config.gamma if report.config is not None else ""
    lines.append(
        f"summary,seed={report.seed},gamma={gamma},final_accuracy={acc}"
    )
    return "\n".join(lines) + "\n"
