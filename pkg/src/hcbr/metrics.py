"""Confusion matrices, derived indicators, support histograms, Pareto frontiers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import NEGATIVE, POSITIVE
from .errors import MetricsError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: float = 0.0
    fn: float = 0.0
    fp: float = 0.0
    tn: float = 0.0

    @property
    def total(self) -> float:
        return self.tp + self.fn + self.fp + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fn + other.fn,
                               self.fp + other.fp, self.tn + other.tn)

    def scaled(self, factor: float) -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp * factor, self.fn * factor, self.fp * factor, self.tn * factor)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    recall: float
    specificity: float
    precision: float
    npv: float
    f1: float
    mcc: float
    abstention_coverage: float = 1.0

    def as_dict(self) -> dict:
        return asdict(self)


def confusion(records: Iterable[tuple[int, int]]) -> ConfusionMatrix:
    """Count (true, predicted) pairs; +1 is the positive class."""
    tp = fn = fp = tn = 0
    n = 0
    for y, p in records:
        n += 1
        if y == POSITIVE:
            if p == POSITIVE:
                tp += 1
            elif p == NEGATIVE:
                fn += 1
            else:
                raise MetricsError(f"prediction {p!r} is not a label; drop abstentions first")
        elif y == NEGATIVE:
            if p == POSITIVE:
                fp += 1
            elif p == NEGATIVE:
                tn += 1
            else:
                raise MetricsError(f"prediction {p!r} is not a label; drop abstentions first")
        else:
            raise MetricsError(f"true label {y!r} is not -1/+1")
    if n == 0:
        raise MetricsError("cannot build a confusion matrix from zero records")
    return ConfusionMatrix(tp, fn, fp, tn)


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def report(m: ConfusionMatrix, coverage: float = 1.0) -> MetricsReport:
    if m.total <= 0:
        raise MetricsError("confusion matrix is empty")
    tp, fn, fp, tn = m.tp, m.fn, m.fp, m.tn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return MetricsReport(
        accuracy=(tp + tn) / m.total,
        recall=recall,
        specificity=_ratio(tn, tn + fp),
        precision=precision,
        npv=_ratio(tn, tn + fn),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        mcc=_ratio(tp * tn - fp * fn, den) if den > 0 else 0.0,
        abstention_coverage=coverage,
    )


def mcc_from_labels(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Vectorised MCC for ±1 label arrays (hot path of the model-space probe)."""
    pos_t = y_true > 0
    pos_p = y_pred > 0
    tp = float(np.count_nonzero(pos_t & pos_p))
    tn = float(np.count_nonzero(~pos_t & ~pos_p))
    fp = float(np.count_nonzero(~pos_t & pos_p))
    fn = float(np.count_nonzero(pos_t & ~pos_p))
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return (tp * tn - fp * fn) / den if den > 0 else 0.0


def aggregate(matrices: Sequence[ConfusionMatrix]) -> dict:
    """Both fold aggregations: mean of per-fold reports and report of the summed matrix."""
    if not matrices:
        raise MetricsError("no folds to aggregate")
    reports = [report(m) for m in matrices]
    keys = ["accuracy", "recall", "specificity", "precision", "npv", "f1", "mcc"]
    mean = {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}
    std = {k: float(np.std([getattr(r, k) for r in reports])) for k in keys}
    summed = matrices[0]
    for m in matrices[1:]:
        summed = summed + m
    return {
        "mean_of_folds": mean,
        "std_of_folds": std,
        "pooled": report(summed).as_dict(),
        "average_matrix": summed.scaled(1.0 / len(matrices)).as_dict(),
        "per_fold": [m.as_dict() for m in matrices],
    }


# ----------------------------------------------------------------------------
# calibration histogram
# ----------------------------------------------------------------------------


@dataclass
class CalibrationHistogram:
    edges: np.ndarray
    correct: np.ndarray
    incorrect: np.ndarray

    def rows(self) -> list[tuple[float, float, int, int]]:
        return [(float(self.edges[i]), float(self.edges[i + 1]), int(self.correct[i]), int(self.incorrect[i]))
                for i in range(len(self.correct))]

    @property
    def total(self) -> int:
        return int(self.correct.sum() + self.incorrect.sum())


def calibration_histogram(predictions: Iterable[tuple[float, bool]], bins: int = 20) -> CalibrationHistogram:
    """Bucket (support, correct) pairs over a range symmetric around 0."""
    if bins < 2:
        raise MetricsError("need at least 2 bins")
    data = list(predictions)
    if not data:
        raise MetricsError("no predictions to histogram")
    s = np.array([d[0] for d in data], dtype=float)
    ok = np.array([bool(d[1]) for d in data])
    bound = float(np.max(np.abs(s)))
    if bound == 0:
        bound = 1.0
    edges = np.linspace(-bound, bound, bins + 1)
    idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, bins - 1)
    correct = np.bincount(idx[ok], minlength=bins)
    incorrect = np.bincount(idx[~ok], minlength=bins)
    return CalibrationHistogram(edges, correct, incorrect)


# ----------------------------------------------------------------------------
# Pareto frontier
# ----------------------------------------------------------------------------


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))


def pareto_frontier(points: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Non-dominated (accuracy, coverage) points, deduplicated, in input order."""
    pts = []
    for p in points:
        p = tuple(p)
        if p not in pts:
            pts.append(p)
    return [p for p in pts if not any(dominates(q, p) for q in pts)]
