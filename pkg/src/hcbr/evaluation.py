"""Cross-validation runs, learning curves and their on-disk reports."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (NEGATIVE, POSITIVE, Case, CsvConfig, Dataset, DuplicateIndex, FoldPlan,
                      duplicate_index, parse_csv, parse_sparse, stratified_folds, stratified_subsample)
from .decision import ABSTAIN, LABEL_NAMES, EtaConfig, LocalityConfig, decide_full
from .errors import ConfigurationError, DataError, HCBRError
from .metrics import ConfusionMatrix, aggregate, calibration_histogram, confusion
from .model import HCBRModel, fit
from .tuning import tune_eta


@dataclass
class ExperimentConfig:
    data: str | None = None
    format: str = "csv"
    label_column: str = "class"
    positive: str = "+1"
    negative: str = "-1"
    folds: int = 10
    iterations: int = 1
    seed: int = 42
    eta: EtaConfig = field(default_factory=EtaConfig)
    tune: bool = False
    tune_folds: int = 10
    locality: LocalityConfig = field(default_factory=LocalityConfig)
    heuristic: bool = False
    bins: int = 20
    out_dir: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.format not in ("csv", "sparse"):
            raise ConfigurationError(f"unknown data format {self.format!r}")
        if self.folds < 2:
            raise ConfigurationError("folds must be >= 2")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")

    def as_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("eta", "locality")}
        d["eta"] = self.eta.as_dict()
        d["locality"] = self.locality.as_dict()
        d.pop("threads")  # execution detail, does not change results
        return d


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.data is None:
        raise ConfigurationError("no data file given")
    path = Path(config.data)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        if config.format == "sparse":
            return parse_sparse(fh, config.positive, config.negative)
        return parse_csv(fh, CsvConfig(config.label_column, config.positive, config.negative))


@dataclass
class PredictionRecord:
    case_id: int
    true_label: int | None
    predicted: int
    s: float
    s_pos: float
    s_neg: float
    coverage: float
    path: str

    def row(self) -> list:
        true = "" if self.true_label is None else LABEL_NAMES[self.true_label]
        return [self.case_id, true, LABEL_NAMES[self.predicted], repr(self.s), repr(self.s_pos),
                repr(self.s_neg), repr(self.coverage), self.path]


PREDICTION_HEADER = ["case_id", "true_label", "predicted", "s", "s_pos", "s_neg", "coverage", "path"]


def predict_cases(model: HCBRModel, cases: Sequence[Case], eta: EtaConfig, locality: LocalityConfig,
                  rng: np.random.Generator, dup: DuplicateIndex | None = None, heuristic: bool = False,
                  unknown: Sequence[int] | None = None) -> list[PredictionRecord]:
    out = []
    for i, c in enumerate(cases):
        unk = unknown[i] if unknown is not None else 0
        o = decide_full(model, c, eta, locality, dup, heuristic, rng, unk)
        sup = o.support
        out.append(PredictionRecord(c.case_id, c.label, o.predicted, sup.s, sup.s_pos, sup.s_neg,
                                    sup.coverage, o.path))
    return out


def write_predictions_csv(records: Sequence[PredictionRecord], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(PREDICTION_HEADER)
    for r in records:
        w.writerow(r.row())


@dataclass
class FoldResult:
    fold: int
    matrix: ConfusionMatrix | None
    coverage: float
    predictions: list[PredictionRecord]
    eta: dict
    n_train: int
    train_features: int
    tune: dict | None = None
    seconds: float = 0.0


def evaluate_fold(dataset: Dataset, plan: FoldPlan, fold: int, config: ExperimentConfig) -> FoldResult:
    start = time.perf_counter()
    train_ids, test_ids = plan.split(fold)
    by_id = {c.case_id: c for c in dataset.cases}
    train = [by_id[i] for i in train_ids]
    test = [by_id[i] for i in test_ids]
    try:
        model = fit(train, dataset.interner, config.iterations)
        eta, tune_doc = config.eta, None
        if config.tune:
            tr = tune_eta(train, dataset.interner, config.tune_folds, config.seed + fold, config.iterations,
                          config.eta.axis)
            eta, tune_doc = tr.eta, tr.as_dict()
        dup = duplicate_index(train) if config.heuristic else None
        rng = np.random.default_rng(config.seed + fold)
        preds = predict_cases(model, test, eta, config.locality, rng, dup, config.heuristic)
    except HCBRError as exc:
        raise type(exc)(f"fold {fold}: {exc}") from exc
    decided = [(p.true_label, p.predicted) for p in preds if p.predicted != ABSTAIN]
    matrix = confusion(decided) if decided else None
    return FoldResult(fold, matrix, len(decided) / len(preds), preds, eta.as_dict(), len(train),
                      model.partition.n_features, tune_doc, time.perf_counter() - start)


def _fold_task(args):
    return evaluate_fold(*args)


@dataclass
class CVResult:
    config: ExperimentConfig
    folds: list[FoldResult]
    source_meta: dict

    @property
    def matrices(self) -> list[ConfusionMatrix]:
        return [f.matrix for f in self.folds if f.matrix is not None]

    @property
    def predictions(self) -> list[PredictionRecord]:
        return [p for f in self.folds for p in f.predictions]

    @property
    def coverage(self) -> float:
        preds = self.predictions
        return sum(p.predicted != ABSTAIN for p in preds) / len(preds)

    def summary(self) -> dict:
        doc = aggregate(self.matrices) if self.matrices else {}
        doc["coverage"] = self.coverage
        doc["per_fold_coverage"] = [f.coverage for f in self.folds]
        doc["per_fold_eta"] = [f.eta for f in self.folds]
        return doc

    @property
    def accuracy(self) -> float:
        return self.summary()["mean_of_folds"]["accuracy"]


def run_cv(config: ExperimentConfig, dataset: Dataset | None = None) -> CVResult:
    """Stratified k-fold evaluation; folds may run in worker processes."""
    if dataset is None:
        dataset = load_dataset(config)
    plan = stratified_folds(dataset, config.folds, config.seed)
    tasks = [(dataset, plan, i, config) for i in range(config.folds)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=min(config.threads, config.folds)) as pool:
            folds = list(pool.map(_fold_task, tasks))
    else:
        folds = [_fold_task(t) for t in tasks]
    folds.sort(key=lambda f: f.fold)
    return CVResult(config, folds, dict(dataset.source_meta))


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def write_manifest(out_dir: Path, command: str, resolved: dict, files: Sequence[str]) -> None:
    _dump({"command": command, "config": resolved, "files": sorted(files)}, out_dir / "manifest.json")


def write_cv_outputs(result: CVResult, out_dir: str | Path, command: str = "evaluate") -> list[str]:
    """Write metrics, predictions, histogram and manifest; timings go to their own file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = ["metrics.json", "predictions.csv", "histogram.csv", "timings.json"]
    _dump({"config": result.config.as_dict(), "source": result.source_meta, "metrics": result.summary()},
          out / "metrics.json")
    with open(out / "predictions.csv", "w", newline="") as fh:
        write_predictions_csv(result.predictions, fh)
    decided = [(p.s, p.predicted == p.true_label) for p in result.predictions if p.predicted != ABSTAIN]
    with open(out / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "correct", "incorrect"])
        if decided:
            for lo, hi, ok, bad in calibration_histogram(decided, result.config.bins).rows():
                w.writerow([repr(lo), repr(hi), ok, bad])
    if any(f.tune for f in result.folds):
        files.append("tune.json")
        _dump([dict(f.tune, outer_fold=f.fold) for f in result.folds], out / "tune.json")
    _dump({"per_fold_seconds": [f.seconds for f in result.folds]}, out / "timings.json")
    write_manifest(out, command, result.config.as_dict(), files)
    return files


# ----------------------------------------------------------------------------
# learning curves
# ----------------------------------------------------------------------------


@dataclass
class LearningCurvePoint:
    train_fraction: float
    train_accuracy: float
    test_accuracy: float
    repetitions: int
    train_std: float
    test_std: float


def _accuracy(records: Sequence[PredictionRecord]) -> float:
    decided = [r for r in records if r.predicted != ABSTAIN]
    if not decided:
        return float("nan")
    return sum(r.predicted == r.true_label for r in decided) / len(decided)


def _has_both(cases: Sequence[Case]) -> bool:
    labels = {c.label for c in cases}
    return POSITIVE in labels and NEGATIVE in labels


def learning_curve(config: ExperimentConfig, fractions: Sequence[float], repetitions: int = 10,
                   dataset: Dataset | None = None, max_retries: int = 10) -> list[LearningCurvePoint]:
    """Train/test accuracy against training-set size over random stratified splits."""
    fractions = list(fractions)
    if not fractions or any(not 0 < f < 1 for f in fractions) or any(
            b <= a for a, b in zip(fractions, fractions[1:])):
        raise ConfigurationError("fractions must be strictly increasing inside (0, 1)")
    if repetitions < 1:
        raise ConfigurationError("repetitions must be >= 1")
    if dataset is None:
        dataset = load_dataset(config)
    points = []
    for fi, frac in enumerate(fractions):
        tr_acc, te_acc = [], []
        for rep in range(repetitions):
            for attempt in range(max_retries):
                rng = np.random.default_rng((config.seed, fi, rep, attempt))
                train, test = stratified_subsample(dataset.cases, frac, rng)
                if _has_both(train) and test:
                    break
            else:
                raise DataError(f"fraction {frac}: could not draw a two-class training set")
            model = fit(train, dataset.interner, config.iterations)
            dup = duplicate_index(train) if config.heuristic else None
            tr_acc.append(_accuracy(predict_cases(model, train, config.eta, config.locality, rng, dup,
                                                  config.heuristic)))
            te_acc.append(_accuracy(predict_cases(model, test, config.eta, config.locality, rng, dup,
                                                  config.heuristic)))
        points.append(LearningCurvePoint(frac, float(np.mean(tr_acc)), float(np.mean(te_acc)),
                                         repetitions, float(np.std(tr_acc)), float(np.std(te_acc))))
    return points


def write_curve_csv(points: Sequence[LearningCurvePoint], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["train_fraction", "train_accuracy", "test_accuracy", "repetitions", "train_std", "test_std"])
    for p in points:
        w.writerow([repr(p.train_fraction), repr(p.train_accuracy), repr(p.test_accuracy), p.repetitions,
                    repr(p.train_std), repr(p.test_std)])
