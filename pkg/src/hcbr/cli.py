"""Command-line interface: ``hcbr <command> [flags]``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .dataset import CsvConfig, FeatureInterner, parse_csv, parse_sparse, stratified_folds
from .decision import EtaConfig, LocalityConfig, parse_label
from .errors import ConfigurationError, DataError, HCBRError
from .evaluation import (ExperimentConfig, learning_curve, load_dataset, predict_cases, run_cv,
                         write_curve_csv, write_cv_outputs, write_manifest, write_predictions_csv)
from .metrics import pareto_frontier
from .model import deserialize_model, fit, serialize_model

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

DEFAULTS = {
    "data": None, "format": "csv", "label_column": "class", "positive": "+1", "negative": "-1",
    "folds": 10, "seed": 42, "iterations": 1,
    "eta_pos": 0.0, "eta_neg": 0.0, "eta_bar_pos": 0.0, "eta_bar_neg": 0.0, "eta_axis": "class",
    "weak_pos": "+1", "weak_neg": "-1",
    "tune": False, "tune_folds": 10, "heuristic": "off", "locality": "off", "fallback": "bernoulli",
    "out_dir": None, "out": None, "model": None, "threads": None, "bins": 20,
    "fold": 0, "points": 50, "etas": None,
    "fractions": "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "reps": 10,
    "n": "1000,2000,4000", "m": "10", "population": 100, "offspring": 100, "generations": 200,
    "alpha": 10.0, "penalty": 0.1, "sigma": None, "sigma_rule": "range",
}

# value types for keys whose default is None
NULLABLE_TYPES = {"threads": int, "sigma": float}

# keys that only matter for execution speed; kept out of manifests
EXECUTION_KEYS = {"threads"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _add_data(p):
    p.add_argument("--data", help="input file (CSV with header, or sparse 'label idx:val' lines)")
    p.add_argument("--format", choices=["csv", "sparse"])
    p.add_argument("--label-column")
    p.add_argument("--positive", help="label token(s) of the positive class, comma separated")
    p.add_argument("--negative", help="label token(s) of the negative class, comma separated")


def _add_decision(p):
    p.add_argument("--eta-pos", type=float)
    p.add_argument("--eta-neg", type=float)
    p.add_argument("--eta-bar-pos", type=float)
    p.add_argument("--eta-bar-neg", type=float)
    p.add_argument("--eta-axis", choices=["class", "net"],
                   help="absolute thresholds compare the class support or the net support |s|")
    p.add_argument("--weak-pos", help="label for weak positive decisions: +1, -1 or abstain")
    p.add_argument("--weak-neg", help="label for weak negative decisions: +1, -1 or abstain")
    p.add_argument("--locality", help="off, abs:N or ratio:R")
    p.add_argument("--fallback", choices=["bernoulli", "majority"])


def _add_common(p):
    p.add_argument("--config", help="JSON document or key=value file; flags take precedence")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hcbr", description="Hypergraph case-based binary classification.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    for name, help_ in (("evaluate", "stratified k-fold cross-validation"),
                        ("tune", "cross-validation with nested threshold tuning")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        _add_data(p)
        _add_decision(p)
        p.add_argument("--folds", type=int)
        p.add_argument("--iterations", type=int)
        p.add_argument("--tune", action="store_const", const=True, default=None)
        p.add_argument("--tune-folds", type=int)
        p.add_argument("--heuristic", choices=["on", "off"])
        p.add_argument("--bins", type=int)
        p.add_argument("--threads", type=int)

    p = sub.add_parser("train", help="fit a model on a whole file and save it")
    _add_common(p)
    _add_data(p)
    p.add_argument("--iterations", type=int)
    p.add_argument("--out", help="model file to write")

    p = sub.add_parser("predict", help="apply a saved model to a file")
    _add_common(p)
    _add_data(p)
    _add_decision(p)
    p.add_argument("--model")
    p.add_argument("--out", help="predictions CSV (default: standard output)")

    p = sub.add_parser("sweep", help="accuracy/coverage trade-off over a threshold grid")
    _add_common(p)
    _add_data(p)
    p.add_argument("--folds", type=int)
    p.add_argument("--fold", type=int, help="which fold of the plan is the test split")
    p.add_argument("--iterations", type=int)
    p.add_argument("--points", type=int, help="grid size when --etas is not given")
    p.add_argument("--etas", help="explicit comma-separated sorted thresholds")
    p.add_argument("--eta-axis", choices=["class", "net"])

    p = sub.add_parser("curve", help="learning curve over training fractions")
    _add_common(p)
    _add_data(p)
    _add_decision(p)
    p.add_argument("--iterations", type=int)
    p.add_argument("--fractions")
    p.add_argument("--reps", type=int)
    p.add_argument("--heuristic", choices=["on", "off"])

    p = sub.add_parser("bench", help="time partition build and strengths on synthetic data")
    _add_common(p)
    p.add_argument("--n", help="comma-separated case counts")
    p.add_argument("--m", help="comma-separated overlap widths")
    p.add_argument("--reps", type=int)

    p = sub.add_parser("probe", help="evolution-strategy search around the learnt strengths")
    _add_common(p)
    _add_data(p)
    p.add_argument("--folds", type=int)
    p.add_argument("--fold", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--offspring", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--penalty", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--sigma-rule", choices=["range", "min_gap"],
                   help="spread of the strengths that sigma is derived from")
    return parser


def read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from None
    try:
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigurationError("config document must be an object")
    except json.JSONDecodeError:
        doc = {}
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigurationError(f"config line {n}: expected key=value")
            doc[key.strip()] = value.strip()
    out = {}
    for key, value in doc.items():
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigurationError(f"unknown config key {key!r}")
        default = DEFAULTS[key]
        if isinstance(value, str) and key in NULLABLE_TYPES:
            value = NULLABLE_TYPES[key](value)
        elif isinstance(value, str) and isinstance(default, bool):
            value = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(value, str) and isinstance(default, int) and not isinstance(default, bool):
            value = int(value)
        elif isinstance(value, str) and isinstance(default, float):
            value = float(value)
        out[key] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    if cfg["threads"] is None:
        cfg["threads"] = os.cpu_count() or 1
    return cfg


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def eta_from(cfg: dict) -> EtaConfig:
    return EtaConfig(cfg["eta_pos"], cfg["eta_neg"], cfg["eta_bar_pos"], cfg["eta_bar_neg"],
                     parse_label(cfg["weak_pos"]), parse_label(cfg["weak_neg"]), cfg["eta_axis"])


def experiment_from(cfg: dict) -> ExperimentConfig:
    return ExperimentConfig(
        data=cfg["data"], format=cfg["format"], label_column=cfg["label_column"],
        positive=cfg["positive"], negative=cfg["negative"], folds=cfg["folds"],
        iterations=cfg["iterations"], seed=cfg["seed"], eta=eta_from(cfg), tune=bool(cfg["tune"]),
        tune_folds=cfg["tune_folds"], locality=LocalityConfig.parse(cfg["locality"], cfg["fallback"]),
        heuristic=cfg["heuristic"] == "on", bins=cfg["bins"], out_dir=cfg["out_dir"],
        threads=max(1, int(cfg["threads"])),
    )


def _manifest_config(cfg: dict, keys) -> dict:
    return {k: cfg[k] for k in sorted(keys) if k not in EXECUTION_KEYS}


def _emit_config(cfg: dict, keys) -> None:
    print(json.dumps({"resolved_config": _manifest_config(cfg, keys)}, sort_keys=True), file=sys.stderr)


def _out_dir(cfg: dict) -> Path | None:
    if cfg["out_dir"] is None:
        return None
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_evaluate(cfg: dict, command: str) -> int:
    if command == "tune":
        cfg["tune"] = True
    exp = experiment_from(cfg)
    result = run_cv(exp)
    out = Path(cfg["out_dir"] or "hcbr-out")
    write_cv_outputs(result, out, command)
    summary = result.summary()
    brief = {"accuracy": summary.get("mean_of_folds", {}).get("accuracy"),
             "mcc": summary.get("mean_of_folds", {}).get("mcc"),
             "coverage": summary["coverage"], "out_dir": str(out)}
    print(json.dumps(brief, sort_keys=True))
    return EXIT_OK


def cmd_train(cfg: dict, command: str) -> int:
    if not cfg["out"]:
        raise ConfigurationError("train needs --out")
    exp = experiment_from(cfg)
    ds = load_dataset(exp)
    keys = ["data", "format", "label_column", "positive", "negative", "iterations", "seed"]
    model = fit(ds.cases, ds.interner, exp.iterations, {"resolved": _manifest_config(cfg, keys)})
    target = Path(cfg["out"])
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(serialize_model(model))
    out = _out_dir(cfg)
    if out is not None:
        write_manifest(out, command, _manifest_config(cfg, keys), [target.name])
    print(json.dumps({"model": cfg["out"], "blocks": len(model), "features": model.partition.n_features},
                     sort_keys=True))
    return EXIT_OK


def _read_query_file(cfg: dict, interner: FeatureInterner):
    path = Path(cfg["data"] or "")
    if not cfg["data"] or not path.exists():
        raise DataError(f"data file not found: {cfg['data']}")
    with open(path, newline="") as fh:
        if cfg["format"] == "sparse":
            return parse_sparse(fh, cfg["positive"], cfg["negative"], interner)
        return parse_csv(fh, CsvConfig(cfg["label_column"], cfg["positive"], cfg["negative"],
                                       require_label=False), interner)


def cmd_predict(cfg: dict, command: str) -> int:
    if not cfg["model"]:
        raise ConfigurationError("predict needs --model")
    try:
        text = Path(cfg["model"]).read_text()
    except OSError as exc:
        raise DataError(f"cannot read model: {exc}") from None
    model = deserialize_model(text)
    # unseen tokens get fresh ids outside the partition and count as discretionary
    ds = _read_query_file(cfg, FeatureInterner(model.interner.tokens))
    rng = np.random.default_rng(cfg["seed"])
    locality = LocalityConfig.parse(cfg["locality"], cfg["fallback"])
    records = predict_cases(model, ds.cases, eta_from(cfg), locality, rng)
    keys = ["model", "data", "format", "label_column", "positive", "negative", "seed", "eta_pos", "eta_neg",
            "eta_bar_pos", "eta_bar_neg", "eta_axis", "weak_pos", "weak_neg", "locality", "fallback"]
    if cfg["out"]:
        with open(cfg["out"], "w", newline="") as fh:
            write_predictions_csv(records, fh)
        out = _out_dir(cfg)
        if out is not None:
            write_manifest(out, command, _manifest_config(cfg, keys), [cfg["out"]])
        else:
            _emit_config(cfg, keys)
    else:
        _emit_config(cfg, keys)
        write_predictions_csv(records, sys.stdout)
    return EXIT_OK


def _split_model(cfg: dict):
    exp = experiment_from(cfg)
    ds = load_dataset(exp)
    plan = stratified_folds(ds, exp.folds, exp.seed)
    if not 0 <= cfg["fold"] < exp.folds:
        raise ConfigurationError(f"--fold must lie in [0, {exp.folds})")
    train_ids, test_ids = plan.split(cfg["fold"])
    by_id = {c.case_id: c for c in ds.cases}
    train = [by_id[i] for i in train_ids]
    test = [by_id[i] for i in test_ids]
    return fit(train, ds.interner, exp.iterations), train, test


def cmd_sweep(cfg: dict, command: str) -> int:
    from .tuning import decision_points, log_eta_grid, sweep_points

    model, _, test = _split_model(cfg)
    pts = decision_points(model, test)
    etas = _float_list(cfg["etas"]) if cfg["etas"] else log_eta_grid(pts, cfg["points"], cfg["eta_axis"])
    sweep = sweep_points(pts, etas, cfg["eta_axis"])
    frontier = pareto_frontier((p.accuracy, p.coverage) for p in sweep if p.accuracy is not None)
    keys = ["data", "format", "label_column", "positive", "negative", "folds", "fold", "seed", "iterations",
            "points", "etas", "eta_axis"]

    def write_sweep(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "coverage", "accuracy", "decided_count"])
        for p in sweep:
            w.writerow([repr(p.eta), repr(p.coverage), "" if p.accuracy is None else repr(p.accuracy), p.decided])

    out = _out_dir(cfg)
    if out is None:
        _emit_config(cfg, keys)
        write_sweep(sys.stdout)
        return EXIT_OK
    with open(out / "sweep.csv", "w", newline="") as fh:
        write_sweep(fh)
    with open(out / "frontier.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["accuracy", "coverage"])
        for a, c in frontier:
            w.writerow([repr(a), repr(c)])
    write_manifest(out, command, _manifest_config(cfg, keys), ["sweep.csv", "frontier.csv"])
    return EXIT_OK


def cmd_curve(cfg: dict, command: str) -> int:
    exp = experiment_from(cfg)
    points = learning_curve(exp, _float_list(cfg["fractions"]), cfg["reps"])
    keys = ["data", "format", "label_column", "positive", "negative", "seed", "iterations", "fractions", "reps",
            "heuristic", "eta_pos", "eta_neg", "eta_bar_pos", "eta_bar_neg", "eta_axis", "weak_pos", "weak_neg",
            "locality", "fallback"]
    out = _out_dir(cfg)
    if out is None:
        _emit_config(cfg, keys)
        write_curve_csv(points, sys.stdout)
        return EXIT_OK
    with open(out / "curve.csv", "w", newline="") as fh:
        write_curve_csv(points, fh)
    write_manifest(out, command, _manifest_config(cfg, keys), ["curve.csv"])
    return EXIT_OK


def cmd_bench(cfg: dict, command: str) -> int:
    from .probe import bench_build, write_bench_csv

    records = bench_build(_int_list(cfg["n"]), _int_list(cfg["m"]), cfg["reps"])
    keys = ["n", "m", "reps"]
    out = _out_dir(cfg)
    if out is None:
        _emit_config(cfg, keys)
        write_bench_csv(records, sys.stdout)
        return EXIT_OK
    with open(out / "bench.csv", "w", newline="") as fh:
        write_bench_csv(records, fh)
    write_manifest(out, command, _manifest_config(cfg, keys), ["bench.csv"])
    return EXIT_OK


def cmd_probe(cfg: dict, command: str) -> int:
    from .probe import ProbeConfig, probe_model_space, write_history_csv

    model, train, test = _split_model(cfg)
    pcfg = ProbeConfig(population=cfg["population"], offspring=cfg["offspring"], generations=cfg["generations"],
                       penalty=cfg["penalty"], alpha=cfg["alpha"], seed=cfg["seed"], sigma=cfg["sigma"],
                       sigma_rule=cfg["sigma_rule"])
    result = probe_model_space(model, train, pcfg, test)
    keys = ["data", "format", "label_column", "positive", "negative", "folds", "fold", "seed", "iterations",
            "population", "offspring", "generations", "alpha", "penalty", "sigma", "sigma_rule"]
    out = _out_dir(cfg)
    if out is None:
        _emit_config(cfg, keys)
        print(json.dumps(result.report(), sort_keys=True))
        return EXIT_OK
    with open(out / "probe_history.csv", "w", newline="") as fh:
        write_history_csv(result.history, fh)
    (out / "probe_report.json").write_text(json.dumps(result.report(), indent=1, sort_keys=True) + "\n")
    write_manifest(out, command, _manifest_config(cfg, keys), ["probe_history.csv", "probe_report.json"])
    return EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate, "tune": cmd_evaluate, "train": cmd_train, "predict": cmd_predict,
    "sweep": cmd_sweep, "curve": cmd_curve, "bench": cmd_bench, "probe": cmd_probe,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, args.command)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"hcbr: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"hcbr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HCBRError as exc:
        print(f"hcbr: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
