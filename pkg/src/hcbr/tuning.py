"""Threshold tuning by nested cross-validation, and abstention sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import NEGATIVE, POSITIVE, Case, FeatureInterner, stratified_folds
from .decision import ABSTAIN, EtaConfig, decide_r2
from .errors import ConfigurationError
from .metrics import pareto_frontier
from .model import HCBRModel, fit

RATIO_CAP = 1.0 - 1e-9
# On either side the winning class holds at least half the total support, so
# any relative threshold up to 0.5 leaves decisions unchanged.
RATIO_NOOP = 0.5


@dataclass(frozen=True)
class DecisionPoint:
    s: float
    s_pos: float
    s_neg: float
    label: int

    @property
    def ratio(self) -> float | None:
        total = self.s_pos + self.s_neg
        if total == 0:
            return None
        return max(self.s_pos, self.s_neg) / total

    @property
    def predicted(self) -> int:
        return POSITIVE if self.s > 0 else NEGATIVE

    @property
    def correct(self) -> bool:
        return self.predicted == self.label


def decision_points(model: HCBRModel, cases: Sequence[Case]) -> list[DecisionPoint]:
    out = []
    for c in cases:
        sup = model.support_case(c)
        out.append(DecisionPoint(sup.s, sup.s_pos, sup.s_neg, c.label))
    return out


@dataclass
class SideSearch:
    """Arrays for one half of the decision space (positive or negative support)."""

    own: np.ndarray      # support toward the side's class (s_pos or s_neg)
    other: np.ndarray    # support toward the opposite class
    ratio: np.ndarray
    label_is_side: np.ndarray  # true label equals the side's class
    valid: np.ndarray    # ratio defined
    axis: str = "class"

    @property
    def floor_values(self) -> np.ndarray:
        """The quantity compared against the absolute threshold."""
        return np.abs(self.own - self.other) if self.axis == "net" else self.own

    def accuracy_hits(self, eta: float, eta_bar: float) -> int:
        """Correct predictions on this side when weak decisions flip to the other class.

        Mirrors :func:`decide_r2`, including points with no support at all,
        which are always weak.
        """
        rel = self.own > eta_bar / (1.0 - eta_bar) * self.other
        if self.axis == "net":
            strong = rel & (self.floor_values >= eta)
        else:
            strong = rel & (self.own > eta)
        return int(np.count_nonzero(strong == self.label_is_side))


def _side_arrays(points: Sequence[DecisionPoint], side: int, axis: str = "class") -> SideSearch:
    if side == POSITIVE:
        sel = [p for p in points if p.s > 0]
        own = np.array([p.s_pos for p in sel])
        other = np.array([p.s_neg for p in sel])
    else:
        sel = [p for p in points if p.s <= 0]
        own = np.array([p.s_neg for p in sel])
        other = np.array([p.s_pos for p in sel])
    ratio = np.array([p.ratio if p.ratio is not None else np.nan for p in sel])
    lab = np.array([p.label == side for p in sel], dtype=bool)
    return SideSearch(own.astype(float), other.astype(float), ratio, lab, ~np.isnan(ratio), axis)


def _half_gaps(values: np.ndarray) -> np.ndarray:
    """Half the distance from each value to its nearest distinct neighbour (0 if none)."""
    uniq = np.unique(values)
    if len(uniq) < 2:
        return np.zeros(len(values))
    gaps = np.full(len(uniq), np.inf)
    d = np.diff(uniq)
    gaps[:-1] = np.minimum(gaps[:-1], d)
    gaps[1:] = np.minimum(gaps[1:], d)
    return 0.5 * gaps[np.searchsorted(uniq, values)]


def side_candidates(search: SideSearch) -> list[tuple[float, float]]:
    """Three candidate (eta, eta_bar) per valid point, preceded by the no-op.

    Offsets are half the gap to the nearest distinct neighbour on each axis,
    positive for correctly classified points and negative otherwise.  A zero
    ratio coordinate is written as 0.5, its decision-equivalent, so that
    averaging choices across folds is not diluted by no-op folds.
    """
    cands = [(0.0, RATIO_NOOP)]
    if not search.valid.any():
        return cands
    x = search.floor_values[search.valid]
    y = search.ratio[search.valid]
    sign = np.where(search.label_is_side[search.valid], 1.0, -1.0)
    eps = sign * _half_gaps(x)
    eps_bar = sign * _half_gaps(y)
    for xi, yi, e, eb in zip(x, y, eps, eps_bar):
        px = max(0.0, float(xi + e))
        py = min(max(RATIO_NOOP, float(yi + eb)), RATIO_CAP)
        cands.extend([(px, py), (px, RATIO_NOOP), (0.0, py)])
    return cands


def best_side(search: SideSearch) -> tuple[tuple[float, float], int, int]:
    """Return (best candidate, its hit count, number of candidates examined).

    Ties keep the earliest candidate, so the no-op wins unless beaten.
    """
    cands = side_candidates(search)
    best, best_hits = cands[0], search.accuracy_hits(*cands[0])
    for c in cands[1:]:
        h = search.accuracy_hits(*c)
        if h > best_hits:
            best, best_hits = c, h
    return best, best_hits, len(cands)


@dataclass
class TuneResult:
    eta: EtaConfig
    untuned_accuracy: list[float] = field(default_factory=list)
    tuned_accuracy: list[float] = field(default_factory=list)
    fold_choices: list[dict] = field(default_factory=list)
    candidates_examined: int = 0

    def as_dict(self) -> dict:
        return {
            "eta": self.eta.as_dict(),
            "untuned_accuracy": self.untuned_accuracy,
            "tuned_accuracy": self.tuned_accuracy,
            "fold_choices": self.fold_choices,
            "candidates_examined": self.candidates_examined,
        }


def tune_on_points(points: Sequence[DecisionPoint], axis: str = "class") -> tuple[dict, float, float, int]:
    """Tune both sides on one validation set.

    Returns (choice, untuned accuracy, tuned accuracy, candidate count).
    """
    n = len(points)
    pos, neg = _side_arrays(points, POSITIVE, axis), _side_arrays(points, NEGATIVE, axis)
    (e1, eb1), h_pos, n_pos = best_side(pos)
    (e0, eb0), h_neg, n_neg = best_side(neg)
    base = sum(p.correct for p in points)
    choice = {"eta_pos": e1, "eta_bar_pos": eb1, "eta_neg": e0, "eta_bar_neg": eb0}
    return choice, base / n, (h_pos + h_neg) / n, n_pos + n_neg


def tune_eta(train_cases: Sequence[Case], interner: FeatureInterner, folds: int = 10,
             seed: int = 0, k_train: int = 1, axis: str = "class") -> TuneResult:
    """Inner cross-validation: pick thresholds per validation fold, then average them."""
    if folds < 2:
        raise ConfigurationError("tuning needs at least 2 inner folds")
    train_cases = list(train_cases)
    by_id = {c.case_id: c for c in train_cases}
    plan = stratified_folds(train_cases, folds, seed)
    result = TuneResult(EtaConfig())
    chosen = []
    for i, (tr_ids, va_ids) in enumerate(plan):
        model = fit([by_id[j] for j in tr_ids], interner, k_train)
        pts = decision_points(model, [by_id[j] for j in va_ids])
        choice, acc0, acc1, n_c = tune_on_points(pts, axis)
        result.untuned_accuracy.append(acc0)
        result.tuned_accuracy.append(acc1)
        result.fold_choices.append(dict(choice, fold=i))
        result.candidates_examined += n_c
        chosen.append(choice)
    mean = {k: float(np.mean([c[k] for c in chosen])) for k in chosen[0]}
    result.eta = EtaConfig(mean["eta_pos"], mean["eta_neg"], mean["eta_bar_pos"], mean["eta_bar_neg"],
                           label_pos_weak=NEGATIVE, label_neg_weak=POSITIVE, axis=axis)
    return result


# ----------------------------------------------------------------------------
# abstention sweep
# ----------------------------------------------------------------------------


@dataclass
class SweepPoint:
    eta: float
    coverage: float
    accuracy: float | None
    decided: int


def sweep_points(points: Sequence[DecisionPoint], etas: Sequence[float], axis: str = "class") -> list[SweepPoint]:
    from .model import SupportBreakdown

    etas = list(etas)
    if any(e < 0 for e in etas) or etas != sorted(etas):
        raise ConfigurationError("sweep thresholds must be non-negative and sorted")
    sups = [SupportBreakdown(p.s_pos, p.s_neg, 1.0) for p in points]
    out = []
    for eta in etas:
        cfg = EtaConfig.abstaining(eta, axis)
        decided = correct = 0
        for sup, p in zip(sups, points):
            pred = decide_r2(sup, cfg).predicted
            if pred == ABSTAIN:
                continue
            decided += 1
            correct += pred == p.label
        acc = correct / decided if decided else None
        out.append(SweepPoint(float(eta), decided / len(points), acc, decided))
    return out


def sweep_eta(model: HCBRModel, test_cases: Sequence[Case], etas: Sequence[float],
              axis: str = "class") -> tuple[list[SweepPoint], list[tuple[float, float]]]:
    """Accuracy on decided cases and coverage for each symmetric threshold, plus the Pareto frontier."""
    pts = sweep_points(decision_points(model, test_cases), etas, axis)
    frontier = pareto_frontier((p.accuracy, p.coverage) for p in pts if p.accuracy is not None)
    return pts, frontier


def log_eta_grid(points: Sequence[DecisionPoint], n: int = 50, axis: str = "class") -> list[float]:
    """0 followed by n-1 log-spaced values spanning the thresholded support values."""
    if axis == "net":
        mags = np.array([abs(p.s) for p in points], dtype=float)
    else:
        mags = np.array([max(p.s_pos, p.s_neg) for p in points], dtype=float)
    mags = mags[mags > 0]
    if len(mags) == 0 or n < 2:
        return [0.0]
    lo, hi = float(mags.min()), float(mags.max())
    lo = min(lo, hi * 1e-3)
    return [0.0] + np.geomspace(lo, hi * 1.01, n - 1).tolist()
