"""Batch command-line front end.

Subcommands: train, pretrain, mmd, gen-synth, eval, export-filters.
Configuration precedence is built-in defaults < --config file (key=value
lines, keys named like the long flags) < explicit flags. Exit codes:
0 success, 1 runtime/data error, 2 argument error, 3 degenerate statistics.
All numeric output is printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import RandomStream
from .data import Dataset, ShiftSpec, gen_synthetic_shift, load_csv, save_csv, zscore_apply, zscore_fit
from .errors import ConfigError, DanetError, DataError, DegenerateBandwidthError
from .kernel import KernelConfig, median_heuristic_bandwidth, mmd_sq_biased
from .network import MODEL_HEADER, parse_model, print_model
from .pretrain import (
    DAE_HEADER,
    DaeTrainConfig,
    NoiseSpec,
    dae_train,
    parse_dae,
    print_dae,
)
from .trainer import (
    TrainConfig,
    evaluate,
    pretrain_stream,
    report_to_csv,
    train_dann,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_pair(raw: str):
    parts = raw.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated reals, got {raw!r}")
    return float(parts[0]), float(parts[1])


def _add(parser, registry, *names, **kwargs):
    """add_argument plus a registry entry so config files share the types."""
    action = parser.add_argument(*names, **kwargs)
    if action.option_strings:
        opt = action.option_strings[-1]
        key = opt.lstrip("-")
        conv = kwargs.get("type", str)
        if kwargs.get("action") == "store_true":
            conv = _parse_bool
        if key != "config":
            registry[key] = (opt, action.dest, conv)
    return action


def _read_config_file(path) -> dict:
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key=value")
            key, _, val = line.partition("=")
            pairs[key.strip()] = val.strip()
    return pairs


def _merge_config(args, argv, registry):
    """Apply config-file values for flags not given on the command line."""
    for key, raw in _read_config_file(args.config).items():
        if key not in registry:
            raise ConfigError(f"{args.config}: unknown config key {key!r}")
        opt, dest, conv = registry[key]
        given = any(tok == opt or tok.startswith(opt + "=") for tok in argv)
        if given:
            continue
        try:
            value = conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{args.config}: bad value for {key}: {exc}") from exc
        setattr(args, dest, value)


def _seed_path(path: str, seed: int, sweep: bool) -> str:
    if not sweep:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}.seed{seed}{ext}"


def _parse_sweep(raw: str):
    prefix = "seeds="
    if not raw.startswith(prefix) or ".." not in raw:
        raise ConfigError(f"--sweep expects seeds=A..B, got {raw!r}")
    lo_s, _, hi_s = raw[len(prefix):].partition("..")
    try:
        lo, hi = int(lo_s), int(hi_s)
    except ValueError as exc:
        raise ConfigError(f"--sweep expects integer bounds: {exc}") from exc
    if hi < lo:
        raise ConfigError(f"--sweep range is empty: {raw!r}")
    return list(range(lo, hi + 1))


# ---------------------------------------------------------------- train


def _build_train(sub):
    registry = {}
    p = sub.add_parser(
        "train",
        help="train the domain-regularized classifier (or the plain one with --gamma 0)",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add(p, registry, "--config", help="key=value config file")
    _add(p, registry, "--source", required=True, help="labeled source CSV")
    _add(p, registry, "--target", required=True, help="unlabeled target CSV")
    _add(p, registry, "--target-labeled", default=None,
         help="labeled target CSV for the semi-supervised setting")
    _add(p, registry, "--eval", default=None, help="labeled CSV to score after training")
    _add(p, registry, "--model-out", default="model.txt", help="model file to write")
    _add(p, registry, "--report-out", default="report.csv", help="per-iteration report CSV")
    _add(p, registry, "--lr", type=float, default=0.02, help="learning rate")
    _add(p, registry, "--iterations", type=int, default=900, help="training epochs")
    _add(p, registry, "--momentum", type=float, default=0.05, help="momentum coefficient")
    _add(p, registry, "--l2", type=float, default=0.003, help="L2 weight regularization")
    _add(p, registry, "--dropout-fraction", type=float, default=0.5, help="hidden dropout fraction")
    _add(p, registry, "--gamma", type=float, default=1e3, help="domain-discrepancy weight")
    _add(p, registry, "--hidden", type=int, default=256, help="hidden layer width")
    _add(p, registry, "--batch-size", type=int, default=20, help="minibatch size")
    _add(p, registry, "--seed", type=int, default=0, help="random seed")
    _add(p, registry, "--setting", choices=["unsupervised", "semi_supervised"], default=None,
         help="adaptation setting; inferred from --target-labeled when omitted")
    _add(p, registry, "--norm", choices=["transductive", "source"], default="transductive",
         help="z-score statistics fit on source+target or source only")
    _add(p, registry, "--pretrain", action="store_true",
         help="run denoising-autoencoder pretraining before training")
    _add(p, registry, "--dae-epochs", type=int, default=200, help="pretraining epochs")
    _add(p, registry, "--dae-lr", type=float, default=0.02, help="pretraining learning rate")
    _add(p, registry, "--dae-noise", type=float, default=0.3,
         help="zero-masking destruction fraction for pretraining")
    _add(p, registry, "--init-dae", default=None, help="encoder file to initialize U1 from")
    _add(p, registry, "--sweep", default=None, help="seeds=A..B trains one model per seed")
    p.set_defaults(func=cmd_train, _registry=registry)
    return p


def cmd_train(args) -> int:
    source = load_csv(args.source, has_labels=True)
    target = load_csv(args.target, has_labels=False)
    target_labeled = (
        load_csv(args.target_labeled, has_labels=True) if args.target_labeled else None
    )
    eval_ds = load_csv(args.eval, has_labels=True) if args.eval else None

    fit_sets = [source]
    if args.norm == "transductive":
        fit_sets.append(target)
        if target_labeled is not None:
            fit_sets.append(target_labeled)
    stats = zscore_fit(*fit_sets)
    source = zscore_apply(source, stats)
    target = zscore_apply(target, stats)
    if target_labeled is not None:
        target_labeled = zscore_apply(target_labeled, stats)
    if eval_ds is not None:
        eval_ds = zscore_apply(eval_ds, stats)

    u1_init = None
    if args.init_dae:
        with open(args.init_dae, "r", encoding="utf-8") as fh:
            u1_init = parse_dae(fh.read())

    setting = args.setting
    if setting is None:
        setting = "semi_supervised" if target_labeled is not None else "unsupervised"
    seeds = _parse_sweep(args.sweep) if args.sweep else [args.seed]
    sweep = args.sweep is not None

    def run_one(seed: int):
        cfg = TrainConfig(
            lr=args.lr,
            iterations=args.iterations,
            momentum=args.momentum,
            l2=args.l2,
            dropout_fraction=args.dropout_fraction,
            gamma=args.gamma,
            hidden=args.hidden,
            batch_size=args.batch_size,
            seed=seed,
            pretraining="dae" if args.pretrain else "none",
            setting=setting,
            dae_epochs=args.dae_epochs,
            dae_lr=args.dae_lr,
            dae_noise=args.dae_noise,
        )
        params, report = train_dann(
            source, target, cfg, target_labeled=target_labeled, u1_init=u1_init
        )
        model_path = _seed_path(args.model_out, seed, sweep)
        report_path = _seed_path(args.report_out, seed, sweep)
        with open(model_path, "w", encoding="utf-8") as fh:
            fh.write(print_model(params))
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(report_to_csv(report))
        pieces = [
            f"seed={seed}",
            f"gamma={_fmt(args.gamma)}",
            f"iterations={args.iterations}",
        ]
        if report.j_nns:
            pieces.append(f"final_j_nns={_fmt(report.j_nns[-1])}")
        if report.mmd_sq:
            pieces.append(f"final_mmd_sq={_fmt(report.mmd_sq[-1])}")
        if eval_ds is not None:
            acc = evaluate(params, eval_ds, dropout_fraction=args.dropout_fraction)
            pieces.append(f"accuracy={_fmt(acc)}")
        pieces.append(f"model={model_path}")
        pieces.append(f"report={report_path}")
        return " ".join(pieces)

    if len(seeds) == 1:
        summaries = [run_one(seeds[0])]
    else:
        workers = min(len(seeds), os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(run_one, seeds))
    for line in summaries:
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------- pretrain


def _build_pretrain(sub):
    registry = {}
    p = sub.add_parser(
        "pretrain",
        help="denoising-autoencoder pretraining on unlabeled CSVs",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add(p, registry, "--config", help="key=value config file")
    _add(p, registry, "--input", action="append", default=None,
         help="unlabeled CSV; repeat to concatenate several files")
    _add(p, registry, "--input-labeled", action="append", default=None,
         help="labeled CSV whose label column is dropped; repeatable")
    _add(p, registry, "--encoder-out", default="encoder.txt", help="encoder file to write")
    _add(p, registry, "--loss-out", default="pretrain_loss.csv", help="per-epoch loss CSV")
    _add(p, registry, "--hidden", type=int, default=256, help="hidden layer width")
    _add(p, registry, "--epochs", type=int, default=200, help="pretraining epochs")
    _add(p, registry, "--lr", type=float, default=0.02, help="learning rate")
    _add(p, registry, "--batch-size", type=int, default=20, help="minibatch size")
    _add(p, registry, "--noise-fraction", type=float, default=0.3,
         help="zero-masking destruction fraction")
    _add(p, registry, "--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_pretrain, _registry=registry)
    return p


def cmd_pretrain(args) -> int:
    datasets = [load_csv(path, has_labels=True) for path in args.input_labeled or []]
    datasets += [load_csv(path, has_labels=False) for path in args.input or []]
    if not datasets:
        raise ConfigError("pretrain needs at least one --input or --input-labeled file")
    stats = zscore_fit(*datasets)
    x = np.vstack([zscore_apply(ds, stats).features for ds in datasets])
    cfg = DaeTrainConfig(
        lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, hidden=args.hidden
    )
    noise = NoiseSpec(destruction_fraction=args.noise_fraction)
    result = dae_train(x, noise, cfg, pretrain_stream(args.seed))
    with open(args.encoder_out, "w", encoding="utf-8") as fh:
        fh.write(print_dae(result.params))
    with open(args.loss_out, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(result.epoch_losses):
            fh.write(f"{i + 1},{_fmt(loss)}\n")
    print(f"seed={args.seed} epochs={args.epochs} encoder={args.encoder_out} loss={args.loss_out}")
    if result.epoch_losses:
        print(f"first_epoch_loss={_fmt(result.epoch_losses[0])}")
        print(f"final_epoch_loss={_fmt(result.epoch_losses[-1])}")
    return EXIT_OK


# ---------------------------------------------------------------- mmd


def _build_mmd(sub):
    registry = {}
    p = sub.add_parser(
        "mmd",
        help="squared maximum mean discrepancy between two unlabeled CSVs",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("a", help="first sample CSV (bandwidth heuristic uses this one)")
    p.add_argument("b", help="second sample CSV")
    _add(p, registry, "--config", help="key=value config file")
    _add(p, registry, "--bandwidth", type=float, default=None,
         help="explicit Gaussian bandwidth; default is the median heuristic on the first file")
    _add(p, registry, "--labeled", action="store_true",
         help="treat the last CSV column as a label and drop it")
    p.set_defaults(func=cmd_mmd, _registry=registry)
    return p


def cmd_mmd(args) -> int:
    a = load_csv(args.a, has_labels=args.labeled)
    b = load_csv(args.b, has_labels=args.labeled)
    if args.bandwidth is not None:
        cfg = KernelConfig(bandwidth_s=args.bandwidth, source="explicit")
    else:
        cfg = median_heuristic_bandwidth(a.features)
    value = mmd_sq_biased(a.features, b.features, cfg)
    print(f"bandwidth={_fmt(cfg.bandwidth_s)}")
    print(f"bandwidth_source={cfg.source}")
    print(f"mmd_sq={_fmt(value)}")
    print(f"mmd={_fmt(math.sqrt(value))}")
    return EXIT_OK


# ---------------------------------------------------------------- gen-synth


def _build_gen_synth(sub):
    registry = {}
    p = sub.add_parser(
        "gen-synth",
        help="generate the rotated/translated Gaussian-blob domain pair",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add(p, registry, "--config", help="key=value config file")
    _add(p, registry, "--out-dir", default=".", help="directory for the output files")
    _add(p, registry, "--classes", type=int, default=2, help="number of classes")
    _add(p, registry, "--per-class", type=int, default=100, help="samples per class per domain")
    _add(p, registry, "--spacing", type=float, default=2.0, help="distance between class centers")
    _add(p, registry, "--theta", type=float, default=30.0, help="target rotation angle, degrees")
    _add(p, registry, "--shift", type=_parse_pair, default=(1.5, 0.0),
         help="target translation as x,y")
    _add(p, registry, "--noise-std", type=float, default=1.0, help="blob standard deviation")
    _add(p, registry, "--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_gen_synth, _registry=registry)
    return p


def cmd_gen_synth(args) -> int:
    spec = ShiftSpec(
        classes=args.classes,
        per_class=args.per_class,
        spacing=args.spacing,
        angle_deg=args.theta,
        translation=tuple(args.shift),
        noise_std=args.noise_std,
    )
    source, target = gen_synthetic_shift(spec, RandomStream(args.seed))
    os.makedirs(args.out_dir, exist_ok=True)
    src_path = os.path.join(args.out_dir, "source.csv")
    tgt_path = os.path.join(args.out_dir, "target.csv")
    tgt_feat_path = os.path.join(args.out_dir, "target_unlabeled.csv")
    meta_path = os.path.join(args.out_dir, "synth_meta.txt")
    save_csv(source, src_path)
    save_csv(target, tgt_path)
    save_csv(
        Dataset(target.features, None, target.class_count, target.domain_tag),
        tgt_feat_path,
    )
    with open(meta_path, "w", encoding="utf-8") as fh:
        fh.write(f"classes={spec.classes}\n")
        fh.write(f"per_class={spec.per_class}\n")
        fh.write(f"spacing={_fmt(spec.spacing)}\n")
        fh.write(f"angle_deg={_fmt(spec.angle_deg)}\n")
        fh.write(f"translation={_fmt(spec.translation[0])},{_fmt(spec.translation[1])}\n")
        fh.write(f"noise_std={_fmt(spec.noise_std)}\n")
        fh.write(f"seed={args.seed}\n")
    print(
        f"source={src_path} target={tgt_path} "
        f"target_unlabeled={tgt_feat_path} meta={meta_path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------- eval


def _build_eval(sub):
    registry = {}
    p = sub.add_parser(
        "eval",
        help="accuracy of a saved model on a labeled CSV",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add(p, registry, "--config", help="key=value config file")
    _add(p, registry, "--model", required=True, help="model file")
    _add(p, registry, "--data", required=True, help="labeled CSV to score")
    _add(p, registry, "--norm-source", default=None,
         help="labeled source CSV the model was trained on; fits z-score statistics")
    _add(p, registry, "--norm-target", default=None,
         help="unlabeled target CSV the model was trained on (transductive statistics)")
    _add(p, registry, "--norm-target-labeled", default=None,
         help="labeled target CSV used in semi-supervised training")
    _add(p, registry, "--dropout-fraction", type=float, default=0.5,
         help="inference scaling matching the training dropout")
    p.set_defaults(func=cmd_eval, _registry=registry)
    return p


def cmd_eval(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        params = parse_model(fh.read())
    data = load_csv(args.data, has_labels=True)
    refs = []
    if args.norm_source:
        refs.append(load_csv(args.norm_source, has_labels=True))
    if args.norm_target:
        refs.append(load_csv(args.norm_target, has_labels=False))
    if args.norm_target_labeled:
        refs.append(load_csv(args.norm_target_labeled, has_labels=True))
    if refs:
        data = zscore_apply(data, zscore_fit(*refs))
    acc = evaluate(params, data, dropout_fraction=args.dropout_fraction)
    print(f"n={data.n}")
    print(f"accuracy={_fmt(acc)}")
    return EXIT_OK


# ---------------------------------------------------------------- export-filters


def _build_export_filters(sub):
    registry = {}
    p = sub.add_parser(
        "export-filters",
        help="tile first-layer weight columns into a plain graymap image",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add(p, registry, "--config", help="key=value config file")
    _add(p, registry, "--model", required=True, help="model or encoder file")
    _add(p, registry, "--out", default="filters.pgm", help="graymap file to write")
    p.set_defaults(func=cmd_export_filters, _registry=registry)
    return p


def _normalized_tile(column: np.ndarray, side: int) -> np.ndarray:
    tile = column.reshape(side, side)
    lo, hi = tile.min(), tile.max()
    if hi == lo:
        return np.full((side, side), 128, dtype=np.int64)
    return np.rint((tile - lo) / (hi - lo) * 255.0).astype(np.int64)


def _pgm_text(img: np.ndarray) -> str:
    # plain graymap; token lines kept at 70 characters or fewer
    lines = ["P2", f"{img.shape[1]} {img.shape[0]}", "255"]
    cur = ""
    for v in img.ravel():
        tok = str(int(v))
        if cur and len(cur) + 1 + len(tok) > 70:
            lines.append(cur)
            cur = tok
        else:
            cur = f"{cur} {tok}".strip()
    if cur:
        lines.append(cur)
    return "\n".join(lines) + "\n"


def cmd_export_filters(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        text = fh.read()
    first = text.splitlines()[0] if text else ""
    if first == MODEL_HEADER:
        u1 = parse_model(text).u1
    elif first == DAE_HEADER:
        u1 = parse_dae(text)
    else:
        raise DataError(f"{args.model}: not a model or encoder file")
    weights = u1[1:]
    d, k = weights.shape
    side = math.isqrt(d)
    if side * side != d:
        raise ConfigError(
            f"input dimension {d} is not a perfect square; cannot reshape "
            f"weight columns into square tiles"
        )
    m = min(k, 100)
    gcols = math.ceil(math.sqrt(m))
    grows = math.ceil(m / gcols)
    canvas = np.zeros((grows * side, gcols * side), dtype=np.int64)
    for i in range(m):
        r, c = divmod(i, gcols)
        canvas[r * side : (r + 1) * side, c * side : (c + 1) * side] = _normalized_tile(
            weights[:, i], side
        )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(_pgm_text(canvas))
    print(f"filters={args.out} tiles={m} tile_side={side} grid={grows}x{gcols}")
    return EXIT_OK


# ---------------------------------------------------------------- driver


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="danet",
        description="Train and probe a shallow domain-adaptive classifier.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    _build_train(sub)
    _build_pretrain(sub)
    _build_mmd(sub)
    _build_gen_synth(sub)
    _build_eval(sub)
    _build_export_filters(sub)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        if getattr(args, "config", None):
            _merge_config(args, argv, args._registry)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateBandwidthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DanetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
