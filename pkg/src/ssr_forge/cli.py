"""Command-line entry point.

Subcommands::

    synth       generate the built-in skewed benchmark as CSV + schema sidecar
    sample      rebalance a labeled CSV with relevance-driven resampling
    relevance   dump the fitted relevance function on a 512-point target grid
    train       train a single co-regression model and dump its history
    evaluate    run the cross-validated model comparison
    sweep-ur    repeat the comparison across several unlabeled ratios

Exit codes: 0 success, 2 configuration/usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .coreg import coreg_train
from .data import DataError, Schema, SplitSpec, child_seed, load_csv, split_labeled, write_csv
from .relevance import RelevanceFn
from .runner import (
    ConfigError,
    parse_experiment_config,
    parse_synth_spec,
    read_config_file,
    run_experiment,
    sweep_ur,
)
from .smogn import METHOD_ORIGINAL, smogn
from .synth import generate, minority_mask

log = logging.getLogger(__name__)


def _doc(args) -> dict:
    return read_config_file(args.config) if args.config else {}


def _experiment_cfg(args) -> "ExperimentConfig":
    models = tuple(args.models.split(",")) if getattr(args, "models", None) else None
    return parse_experiment_config(
        _doc(args),
        dataset=args.dataset,
        schema=args.schema,
        output_dir=getattr(args, "output_dir", None),
        seed=args.seed,
        unlabeled_ratio=getattr(args, "ur", None),
        folds=getattr(args, "folds", None),
        models=models,
    )


def _cmd_synth(args) -> int:
    spec = parse_synth_spec(_doc(args), n=args.n, seed=args.seed)
    d = generate(spec)
    write_csv(d, args.out)
    schema_path = args.schema_out or args.out + ".schema.json"
    d.schema.to_json_file(schema_path)
    n_minority = int(minority_mask(d).sum())
    print(f"wrote {len(d)} rows to {args.out} ({n_minority} minority), schema to {schema_path}")
    return 0


def _cmd_sample(args) -> int:
    cfg = _experiment_cfg(args)
    d = load_csv(cfg.dataset, Schema.from_json_file(cfg.schema))
    params = cfg.smogn
    if args.seed is not None:
        params = replace(params, seed=child_seed(args.seed, "sample"))
    resampled, records = smogn(d, params)
    write_csv(resampled, args.out)
    synthetic = sum(1 for r in records if r.method != METHOD_ORIGINAL)
    print(f"wrote {len(resampled)} rows to {args.out} ({len(d)} in, {synthetic} synthetic)")
    return 0


def _cmd_relevance(args) -> int:
    cfg = _experiment_cfg(args)
    d = load_csv(cfg.dataset, Schema.from_json_file(cfg.schema))
    y = d.y[d.labeled_mask]
    if y.size == 0:
        raise DataError("relevance needs at least one labeled target")
    if cfg.smogn.control_points is not None:
        fn = RelevanceFn(cfg.smogn.control_points)
    else:
        fn = RelevanceFn.from_targets(y)
    grid = np.linspace(float(y.min()), float(y.max()), 512)
    phi = fn(grid)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y", "phi"])
        for yv, pv in zip(grid, phi):
            writer.writerow([repr(float(yv)), repr(float(pv))])
    points = " ".join(f"({y0:g}, {p0:g})" for y0, p0, _ in fn.control_points)
    print(f"wrote 512-point relevance grid to {args.out}; control points: {points}")
    return 0


def _cmd_train(args) -> int:
    cfg = _experiment_cfg(args)
    d = load_csv(cfg.dataset, Schema.from_json_file(cfg.schema))
    L, U = split_labeled(
        d,
        SplitSpec(
            unlabeled_ratio=cfg.unlabeled_ratio,
            folds=cfg.folds,
            seed=child_seed(cfg.seed, "mask-once"),
        ),
    )
    model = coreg_train(L, U, replace(cfg.coreg, seed=child_seed(cfg.seed, "train-once")))
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "history.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "learner", "instance_id", "delta", "pseudo_label"])
        for entry in model.history:
            writer.writerow(
                [entry.iteration, entry.learner, entry.uid, repr(entry.delta), repr(entry.pseudo_label)]
            )
    print(
        f"trained on {len(L)} labeled / {len(U)} unlabeled instances; "
        f"{model.iterations_run} iterations, {len(model.history)} pseudo-labels; history in {path}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _experiment_cfg(args)
    report = run_experiment(cfg)
    for model in cfg.models:
        agg = report.summary[model]["rmse"]
        mean = "NA" if agg["mean"] is None else f"{agg['mean']:.4f}"
        sd = "NA" if agg["sd"] is None else f"{agg['sd']:.4f}"
        print(f"{model:12s} rmse {mean} +/- {sd}")
    print(f"report written to {os.path.join(cfg.output_dir, 'report.json')}")
    return 0


def _cmd_sweep_ur(args) -> int:
    cfg = _experiment_cfg(args)
    try:
        urs = [float(v) for v in args.urs.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse unlabeled ratios from {args.urs!r}") from None
    sweep_ur(cfg, urs)
    print(f"sweep table written to {os.path.join(cfg.output_dir, 'ur_sweep.csv')}")
    return 0


def _add_common(sub, output_dir=False, split=False) -> None:
    sub.add_argument("--config", help="TOML config file")
    sub.add_argument("--dataset", help="input CSV path (overrides config)")
    sub.add_argument("--schema", help="schema JSON path (overrides config)")
    sub.add_argument("--seed", type=int, help="root seed (overrides config)")
    if output_dir:
        sub.add_argument("--output-dir", dest="output_dir", help="directory for run outputs")
    if split:
        sub.add_argument("--ur", type=float, help="unlabeled ratio in [0, 1)")
        sub.add_argument("--folds", type=int, help="cross-validation fold count")
        sub.add_argument("--models", help="comma-separated model ids")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssr-forge", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate the skewed synthetic benchmark")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--n", type=int, help="number of rows (overrides config)")
    p.add_argument("--seed", type=int, help="generator seed (overrides config)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--schema-out", help="schema sidecar path (default: <out>.schema.json)")
    p.set_defaults(func=_cmd_synth)

    p = subs.add_parser("sample", help="rebalance a labeled CSV")
    _add_common(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_sample)

    p = subs.add_parser("relevance", help="dump the relevance function on a target grid")
    _add_common(p)
    p.add_argument("--out", required=True, help="output CSV path (columns y, phi)")
    p.set_defaults(func=_cmd_relevance)

    p = subs.add_parser("train", help="train one co-regression model, dump its history")
    _add_common(p, output_dir=True, split=True)
    p.set_defaults(func=_cmd_train)

    p = subs.add_parser("evaluate", help="run the cross-validated comparison")
    _add_common(p, output_dir=True, split=True)
    p.set_defaults(func=_cmd_evaluate)

    p = subs.add_parser("sweep-ur", help="compare models across unlabeled ratios")
    _add_common(p, output_dir=True, split=True)
    p.add_argument("--urs", default="0.5,0.8,0.99", help="comma-separated unlabeled ratios")
    p.set_defaults(func=_cmd_sweep_ur)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
