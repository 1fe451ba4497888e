"""Command-line front end.

Subcommands: train, predict, evaluate, cv, export-lp, benchmark.
Datasets are CSV paths or ``synth:<name>`` references to the built-in
generators. Features are standardized before training by default, and
the transform is folded into the saved weights, so model files always
apply directly to raw feature rows. Verbosity is controlled by the
LOCT_LOG environment variable (error, info, debug).

Exit codes: 0 on success (including solver time-limit statuses, which
are recorded in the report), 1 on runtime errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from typing import Optional

import numpy as np

from .dataset import Dataset, SplitSpec, load_csv, standardize, train_test_split
from .evaluation import (ConfusionCounts, RunResult, balanced_accuracy,
                         emit_report, sparsity)
from .formulation import LossSpec, RegularizerSpec, export_lp
from .solver import SolverConfig
from .synth import dataset_by_name, dataset_names
from .training import TrainConfig, build_model, cross_validate, train
from .tree import TreeModel

logger = logging.getLogger("loct.cli")

_LOSS_FLAGS = {"logistic": "logistic_pwl", "hinge": "hinge",
               "misclass": "misclassification"}
_TANGENT_FLAGS = {"v0": "V0", "v1": "V1", "v2": "V2", "v3": "V3"}


class UsageError(Exception):
    """Bad flag combination; reported as a one-line diagnostic, exit 2."""


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("LOCT_LOG", "error").strip().lower()
    logging.basicConfig(level=levels.get(name, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"{flag} expects a comma-separated number list, got {text!r}")
    if not values:
        raise UsageError(f"{flag} is empty")
    return values


def _parse_ints(text: str, flag: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"{flag} expects a comma-separated integer list, got {text!r}")
    if not values:
        raise UsageError(f"{flag} is empty")
    return values


def _label_column(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _load_dataset(args, seed: Optional[int] = None) -> Dataset:
    """Load --data: a synth:<name> reference or a CSV path."""
    ref = args.data
    if ref.startswith("synth:"):
        name = ref[len("synth:"):]
        return dataset_by_name(name, seed=args.seed if seed is None else seed)
    return load_csv(ref, _label_column(args.label_column), args.positive_label)


def _loss_spec(loss_flag: str, tangents: Optional[str], costs, depth: int) -> LossSpec:
    kind = _LOSS_FLAGS.get(loss_flag)
    if kind is None:
        raise UsageError(f"unknown loss {loss_flag!r}")
    if tangents is not None and kind != "logistic_pwl":
        raise UsageError("--tangents applies only to the logistic loss")
    if kind == "misclassification" and len(costs) != 1:
        raise UsageError("the misclassification loss takes a single --C value")
    if kind != "misclassification" and len(costs) not in (1, depth):
        raise UsageError(f"--C takes 1 or {depth} values for depth {depth}")
    tangent_set = _TANGENT_FLAGS[tangents] if tangents else "V0"
    return LossSpec(kind, costs, tangent_set)


def _reg_spec(reg_flag: str, alpha: Optional[float], budget: Optional[str],
              depth: int) -> RegularizerSpec:
    if reg_flag in ("none", "l1"):
        if alpha is not None:
            raise UsageError("--alpha applies only to --reg sfs")
        if budget is not None:
            raise UsageError("--budget applies only to --reg sfs or hfs")
        return RegularizerSpec(reg_flag)
    if reg_flag == "sfs":
        if alpha is None:
            raise UsageError("--reg sfs requires --alpha")
        budgets = _parse_floats(budget, "--budget") if budget else (0.0,)
        if len(budgets) not in (1, depth):
            raise UsageError(f"--budget takes 1 or {depth} values for depth {depth}")
        return RegularizerSpec("sfs", alpha=alpha, sfs_budgets=budgets)
    if reg_flag == "hfs":
        if budget is None:
            raise UsageError("--reg hfs requires --budget")
        values = _parse_ints(budget, "--budget")
        if len(values) != 1:
            raise UsageError("--reg hfs takes a single --budget value")
        if alpha is not None:
            raise UsageError("--alpha applies only to --reg sfs")
        return RegularizerSpec("hfs", hfs_budget=values[0])
    raise UsageError(f"unknown regularizer {reg_flag!r}")


def _train_config(args) -> TrainConfig:
    if args.depth < 1:
        raise UsageError("--depth must be at least 1")
    costs = _parse_floats(args.C, "--C")
    loss = _loss_spec(args.loss, args.tangents, costs, args.depth)
    reg = _reg_spec(args.reg, args.alpha, args.budget, args.depth)
    solver = SolverConfig(time_limit_seconds=args.time_limit, log_interval=25)
    try:
        return TrainConfig(
            depth=args.depth, loss=loss, reg=reg, big_m=args.big_m,
            epsilon=args.epsilon, solver=solver, refine=not args.no_refine,
            seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _fold_standardization(model: TreeModel, data: Dataset) -> TreeModel:
    """Rewrite node weights so the model applies to raw features.

    With standardized features s = (x - mean)/std, the node score
    w.s + b equals (w/std).x + (b - (w/std).mean) on raw features.
    """
    if data.standardization is None:
        return model
    mean, std = data.standardization
    W = model.weights / std
    B = model.biases - W @ mean
    return TreeModel(model.topology, W, B, model.epsilon, model.loss_kind)


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    config = _train_config(args)
    raw = _load_dataset(args)
    data = raw if args.no_standardize else standardize(raw)
    report = train(data, config)
    model = _fold_standardization(report.model, data)

    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.json")
    with open(model_path, "w") as fh:
        fh.write(model.to_json() + "\n")
    doc = report.to_json_dict()
    doc["standardized"] = not args.no_standardize
    report_path = os.path.join(args.out, "report.json")
    _write_json(doc, report_path)
    print(f"model written to {model_path}")
    print(f"report written to {report_path} (status {report.mip_status})")
    return 0


def _load_model(path: str) -> TreeModel:
    with open(path) as fh:
        return TreeModel.from_json(fh.read())


def _check_width(model: TreeModel, data: Dataset) -> None:
    if model.p != data.p:
        raise ValueError(
            f"model expects {model.p} features but the data has {data.p}")


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    data = _load_dataset(args)
    _check_width(model, data)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["row", "label", "probability", "path"]
        header += [f"conf_{h}" for h in range(1, model.depth + 1)]
        writer.writerow(header)
        for i in range(data.n):
            pred = model.predict_one(data.features[i])
            row = [i, pred.label, format(pred.probability, ".10g"),
                   "|".join(str(t) for t in pred.path)]
            row += [format(c, ".10g") for c in pred.confidences]
            writer.writerow(row)
    print(f"predictions written to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    data = _load_dataset(args)
    _check_width(model, data)
    pred = model.predict(data.features)
    counts = ConfusionCounts.from_labels(data.labels, pred)
    doc = {
        "bacc": balanced_accuracy(counts),
        "tp": counts.tp,
        "tn": counts.tn,
        "fp": counts.fp,
        "fn": counts.fn,
        "n": counts.total,
        "sparsity": sparsity(model),
    }
    if args.out:
        _write_json(doc, args.out)
        print(f"metrics written to {args.out}")
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_cv(args) -> int:
    base = _train_config(args)
    layers = 1 if args.loss == "misclass" else args.depth
    grid: list[dict] = []
    c_values = _parse_floats(args.grid_c, "--grid-c") if args.grid_c else None
    alpha_values = (_parse_floats(args.grid_alpha, "--grid-alpha")
                    if args.grid_alpha else None)
    if c_values is None and alpha_values is None:
        raise UsageError("cv needs --grid-c and/or --grid-alpha")
    c_combos = (list(itertools.product(c_values, repeat=layers))
                if c_values else [None])
    for combo in c_combos:
        for alpha in (alpha_values if alpha_values else [None]):
            entry: dict = {}
            if combo is not None:
                entry["slack_costs"] = combo
            if alpha is not None:
                entry["alpha"] = alpha
            grid.append(entry)
    logger.info("cross-validating %d configurations on %d folds",
                len(grid), args.folds)

    raw = _load_dataset(args)
    data = raw if args.no_standardize else standardize(raw)
    best, records = cross_validate(data, base, grid, folds=args.folds)

    os.makedirs(args.out, exist_ok=True)
    best_path = os.path.join(args.out, "best_config.json")
    _write_json({
        "depth": best.depth,
        "loss_kind": best.loss.kind,
        "tangent_set": best.loss.tangent_set,
        "slack_costs": list(best.loss.slack_costs),
        "reg_kind": best.reg.kind,
        "alpha": best.reg.alpha,
        "sfs_budgets": list(best.reg.sfs_budgets),
        "hfs_budget": best.reg.hfs_budget,
        "big_m": best.big_m,
        "epsilon": best.epsilon,
        "folds": args.folds,
    }, best_path)
    table_path = os.path.join(args.out, "cv_table.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid_index", "params", "fold", "bacc", "time_s"])
        for rec in records:
            writer.writerow([rec.grid_index, json.dumps(rec.params, sort_keys=True),
                             rec.fold, format(rec.bacc, ".10g"),
                             format(rec.time_s, ".10g")])
    print(f"best config written to {best_path}")
    print(f"fold table written to {table_path}")
    return 0


def cmd_export_lp(args) -> int:
    config = _train_config(args)
    raw = _load_dataset(args)
    data = raw if args.no_standardize else standardize(raw)
    model = build_model(data, config)
    export_lp(model, args.out)
    print(f"LP written to {args.out} "
          f"({model.n_constraints} rows, {model.n_variables} columns)")
    return 0


def _config_from_dict(entry: dict, time_limit: float, seed: int) -> TrainConfig:
    """Benchmark config entry -> TrainConfig (same keys as train flags)."""
    depth = int(entry.get("depth", 2))
    if depth < 1:
        raise UsageError(f"config {entry.get('name')!r}: depth must be >= 1")
    costs = tuple(float(c) for c in np.atleast_1d(entry.get("C", 1.0)).tolist())
    loss = _loss_spec(entry.get("loss", "logistic"), entry.get("tangents"),
                      costs, depth)
    budget = entry.get("budget")
    if budget is not None and not isinstance(budget, str):
        budget = ",".join(str(v) for v in np.atleast_1d(budget).tolist())
    reg = _reg_spec(entry.get("reg", "l1"), entry.get("alpha"), budget, depth)
    solver = SolverConfig(time_limit_seconds=time_limit, log_interval=25)
    return TrainConfig(depth=depth, loss=loss, reg=reg,
                       big_m=float(entry.get("big_m", 100.0)),
                       epsilon=float(entry.get("epsilon", 1e-5)),
                       solver=solver, refine=not entry.get("no_refine", False),
                       seed=seed)


def cmd_benchmark(args) -> int:
    with open(args.configs) as fh:
        config_entries = json.load(fh)
    if not isinstance(config_entries, list) or not config_entries:
        raise UsageError("--configs must be a JSON list of config objects")
    names = [entry.get("name") for entry in config_entries]
    if any(not n for n in names) or len(set(names)) != len(names):
        raise UsageError("every config needs a unique 'name'")
    dataset_refs = [s.strip() for s in args.datasets.split(",") if s.strip()]
    if not dataset_refs:
        raise UsageError("--datasets is empty")
    seeds = _parse_ints(args.seeds, "--seeds")

    results: list[RunResult] = []
    for ref in dataset_refs:
        problem = os.path.splitext(os.path.basename(ref))[0]
        for seed in seeds:
            if ref.startswith("synth:"):
                data = dataset_by_name(ref[len("synth:"):], seed=seed)
                problem = ref[len("synth:"):]
            else:
                data = load_csv(ref, _label_column(args.label_column),
                                args.positive_label)
            split = SplitSpec(test_fraction=args.test_fraction, seed=seed)
            tr_raw, te_raw = train_test_split(data, split)
            tr = standardize(tr_raw)
            te = standardize(te_raw, stats_from=tr)
            for entry in config_entries:
                config = _config_from_dict(entry, args.time_limit, seed)
                t0 = time.monotonic()
                try:
                    report = train(tr, config)
                    pred = report.model.predict(te.features)
                    bacc = balanced_accuracy(
                        ConfusionCounts.from_labels(te.labels, pred))
                    results.append(RunResult(
                        problem=problem, seed=seed, model=entry["name"],
                        depth=config.depth, bacc=bacc,
                        time_s=time.monotonic() - t0, gap=report.mip_gap,
                        sparsity=sparsity(report.model)))
                except Exception as exc:
                    logger.error("run %s/%s/%d failed: %s",
                                 problem, entry["name"], seed, exc)
                    results.append(RunResult(
                        problem=problem, seed=seed, model=entry["name"],
                        depth=config.depth, bacc=float("nan"),
                        time_s=time.monotonic() - t0, gap=float("nan"),
                        sparsity=float("nan"), failed=True))

    paths = emit_report(results, args.out_dir)
    for kind, path in sorted(paths.items()):
        print(f"{kind} written to {path}")
    return 0


def _add_data_flags(sub) -> None:
    sub.add_argument("--data", required=True,
                     help="CSV path or synth:<name> (%s)" % ", ".join(dataset_names()))
    sub.add_argument("--label-column", default="-1",
                     help="label column name or index (default: last column)")
    sub.add_argument("--positive-label", default="1",
                     help="raw label value mapped to +1")
    sub.add_argument("--no-standardize", action="store_true",
                     help="train on raw features")


def _add_model_flags(sub) -> None:
    sub.add_argument("--depth", type=int, required=True)
    sub.add_argument("--loss", choices=sorted(_LOSS_FLAGS), default="logistic")
    sub.add_argument("--tangents", choices=sorted(_TANGENT_FLAGS), default=None)
    sub.add_argument("--C", default="1", help="slack cost, single or per-layer list")
    sub.add_argument("--reg", choices=["none", "l1", "sfs", "hfs"], default="l1")
    sub.add_argument("--alpha", type=float, default=None,
                     help="sfs feature-count penalty weight")
    sub.add_argument("--budget", default=None,
                     help="hfs per-node feature cap, or sfs per-layer floors")
    sub.add_argument("--big-m", type=float, default=100.0, dest="big_m")
    sub.add_argument("--epsilon", type=float, default=1e-5)
    sub.add_argument("--time-limit", type=float, default=300.0, dest="time_limit")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--no-refine", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loct", description="Train and evaluate oblique classification "
        "trees by mixed-integer optimization.")
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="fit a tree and write model + report")
    _add_data_flags(p_train)
    _add_model_flags(p_train)
    p_train.add_argument("--out", default=".", help="output directory")
    p_train.set_defaults(func=cmd_train)

    p_pred = subs.add_parser("predict", help="per-row predictions with confidences")
    p_pred.add_argument("--model", required=True)
    _add_data_flags(p_pred)
    p_pred.add_argument("--out", default="predictions.csv")
    p_pred.add_argument("--seed", type=int, default=0)
    p_pred.set_defaults(func=cmd_predict)

    p_eval = subs.add_parser("evaluate", help="balanced accuracy and sparsity")
    p_eval.add_argument("--model", required=True)
    _add_data_flags(p_eval)
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_evaluate)

    p_cv = subs.add_parser("cv", help="k-fold grid search")
    _add_data_flags(p_cv)
    _add_model_flags(p_cv)
    p_cv.add_argument("--grid-c", default=None, dest="grid_c",
                      help="comma list of C values, crossed over layers")
    p_cv.add_argument("--grid-alpha", default=None, dest="grid_alpha",
                      help="comma list of sfs alpha values")
    p_cv.add_argument("--folds", type=int, default=4)
    p_cv.add_argument("--out", default=".")
    p_cv.set_defaults(func=cmd_cv)

    p_lp = subs.add_parser("export-lp", help="write the training MILP in LP format")
    _add_data_flags(p_lp)
    _add_model_flags(p_lp)
    p_lp.add_argument("--out", default="model.lp")
    p_lp.set_defaults(func=cmd_export_lp)

    p_bench = subs.add_parser("benchmark",
                              help="cross-product benchmark with report CSVs")
    p_bench.add_argument("--datasets", required=True,
                         help="comma list of CSV paths or synth:<name> refs")
    p_bench.add_argument("--configs", required=True,
                         help="JSON file: list of named config objects")
    p_bench.add_argument("--seeds", default="0")
    p_bench.add_argument("--test-fraction", type=float, default=0.2,
                         dest="test_fraction")
    p_bench.add_argument("--time-limit", type=float, default=300.0,
                         dest="time_limit")
    p_bench.add_argument("--label-column", default="-1")
    p_bench.add_argument("--positive-label", default="1")
    p_bench.add_argument("--out-dir", default="benchmark", dest="out_dir")
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
