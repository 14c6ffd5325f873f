"""Turning supports into labels: base rule, thresholded rule, fallbacks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .dataset import NEGATIVE, POSITIVE, Case, DuplicateIndex
from .errors import ConfigurationError
from .model import HCBRModel, SupportBreakdown

ABSTAIN = 0

LABEL_NAMES = {POSITIVE: "+1", NEGATIVE: "-1", ABSTAIN: "abstain"}


def parse_label(value) -> int:
    """Accept +1/-1/0 or the strings '+1', '1', '-1', 'abstain'."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("abstain", "none", "0", "?"):
            return ABSTAIN
        value = int(v)
    if value not in (POSITIVE, NEGATIVE, ABSTAIN):
        raise ConfigurationError(f"invalid decision label {value!r}")
    return int(value)


@dataclass(frozen=True)
class EtaConfig:
    """Support thresholds; ``*_bar`` values are relative (ratio) thresholds in [0, 1).

    ``axis`` selects what the absolute thresholds compare against: the
    winning class support (``"class"``) or the net support |s| (``"net"``).
    """

    eta_pos: float = 0.0
    eta_neg: float = 0.0
    eta_bar_pos: float = 0.0
    eta_bar_neg: float = 0.0
    label_pos_weak: int = POSITIVE
    label_neg_weak: int = NEGATIVE
    axis: Literal["class", "net"] = "class"

    def __post_init__(self):
        if self.axis not in ("class", "net"):
            raise ConfigurationError(f"unknown threshold axis {self.axis!r}")
        if self.eta_pos < 0 or self.eta_neg < 0:
            raise ConfigurationError("eta_pos and eta_neg must be >= 0")
        for v in (self.eta_bar_pos, self.eta_bar_neg):
            if not 0 <= v < 1:
                raise ConfigurationError(f"relative thresholds must lie in [0, 1), got {v}")
        for lab in (self.label_pos_weak, self.label_neg_weak):
            if lab not in (POSITIVE, NEGATIVE, ABSTAIN):
                raise ConfigurationError(f"invalid weak label {lab!r}")

    @classmethod
    def abstaining(cls, eta: float, axis: str = "class") -> "EtaConfig":
        """Symmetric absolute threshold with abstention on both sides."""
        return cls(eta, eta, 0.0, 0.0, ABSTAIN, ABSTAIN, axis)

    def as_dict(self) -> dict:
        return {
            "eta_pos": self.eta_pos, "eta_neg": self.eta_neg,
            "eta_bar_pos": self.eta_bar_pos, "eta_bar_neg": self.eta_bar_neg,
            "label_pos_weak": LABEL_NAMES[self.label_pos_weak],
            "label_neg_weak": LABEL_NAMES[self.label_neg_weak],
            "axis": self.axis,
        }


@dataclass(frozen=True)
class LocalityConfig:
    mode: Literal["off", "absolute", "ratio"] = "off"
    delta: float = 0.0
    fallback: Literal["bernoulli", "majority"] = "bernoulli"

    def __post_init__(self):
        if self.mode not in ("off", "absolute", "ratio"):
            raise ConfigurationError(f"unknown locality mode {self.mode!r}")
        if self.fallback not in ("bernoulli", "majority"):
            raise ConfigurationError(f"unknown fallback {self.fallback!r}")
        if self.mode == "absolute" and (self.delta < 0 or int(self.delta) != self.delta):
            raise ConfigurationError("absolute locality threshold must be a non-negative integer")
        if self.mode == "ratio" and not 0 <= self.delta <= 1:
            raise ConfigurationError("ratio locality threshold must lie in [0, 1]")

    @classmethod
    def parse(cls, text: str, fallback: str = "bernoulli") -> "LocalityConfig":
        """'off', 'abs:3' or 'ratio:0.5'."""
        text = text.strip()
        if text == "off":
            return cls("off", 0.0, fallback)
        kind, _, val = text.partition(":")
        if kind in ("abs", "absolute"):
            return cls("absolute", float(int(val)), fallback)
        if kind == "ratio":
            return cls("ratio", float(val), fallback)
        raise ConfigurationError(f"cannot parse locality {text!r} (expected off, abs:N or ratio:R)")

    def is_outside(self, covered: int, discretionary: int, query_size: int) -> bool:
        """True when the query falls in the uncovered region and must use the fallback."""
        if self.mode == "absolute":
            return covered < self.delta
        if self.mode == "ratio":
            return discretionary / query_size > self.delta
        return False

    def as_dict(self) -> dict:
        return {"mode": self.mode, "delta": self.delta, "fallback": self.fallback}


@dataclass
class DecisionOutcome:
    predicted: int
    support: SupportBreakdown
    path: Literal["duplicate_bypass", "locality_fallback", "r2_strong", "r2_weak"]


def decide_r1(support: SupportBreakdown | float) -> int:
    s = support.s if isinstance(support, SupportBreakdown) else support
    return POSITIVE if s > 0 else NEGATIVE


def _ratio(eta_bar: float) -> float:
    return eta_bar / (1.0 - eta_bar)


def clears(own: float, other: float, eta: float, eta_bar: float, axis: str = "class") -> bool:
    """Whether one side's support is strong enough for a confident decision."""
    if axis == "net":
        return own > _ratio(eta_bar) * other and abs(own - other) >= eta
    return own > max(_ratio(eta_bar) * other, eta)


def decide_r2(support: SupportBreakdown, eta: EtaConfig) -> DecisionOutcome:
    """Thresholded rule.  Each side needs its own support to clear both an
    absolute floor and a multiple of the opposing support."""
    sp, sn = support.s_pos, support.s_neg
    if sp - sn > 0:
        if clears(sp, sn, eta.eta_pos, eta.eta_bar_pos, eta.axis):
            return DecisionOutcome(POSITIVE, support, "r2_strong")
        return DecisionOutcome(eta.label_pos_weak, support, "r2_weak")
    if clears(sn, sp, eta.eta_neg, eta.eta_bar_neg, eta.axis):
        return DecisionOutcome(NEGATIVE, support, "r2_strong")
    return DecisionOutcome(eta.label_neg_weak, support, "r2_weak")


def duplicate_vote(dup: DuplicateIndex, signature: tuple[int, ...], prevalence: float) -> int:
    """Majority label of a conflicting signature.

    Ties fall back to the majority over all redundant occurrences, then to
    the dataset prevalence.
    """
    counts = dup.groups[signature]
    if counts[POSITIVE] != counts[NEGATIVE]:
        return POSITIVE if counts[POSITIVE] > counts[NEGATIVE] else NEGATIVE
    red = dup.redundant_prevalence()
    if red is not None and red != 0.5:
        return POSITIVE if red > 0.5 else NEGATIVE
    return POSITIVE if prevalence >= 0.5 else NEGATIVE


def decide_full(model: HCBRModel, case: Case, eta: EtaConfig = EtaConfig(),
                locality: LocalityConfig = LocalityConfig(), dup: DuplicateIndex | None = None,
                heuristic_on: bool = False, rng: np.random.Generator | None = None,
                unknown: int = 0, explain: bool = False) -> DecisionOutcome:
    """Full prediction pipeline: duplicate bypass, locality fallback, then rule R2.

    ``unknown`` counts query tokens that were not even present in the
    interner; they count as discretionary features.
    """
    projection = model.project(case, unknown)
    sup = model.support(projection, explain)
    if heuristic_on and dup is not None and unknown == 0 and dup.is_redundant(case.features):
        return DecisionOutcome(duplicate_vote(dup, case.features, model.prevalence), sup, "duplicate_bypass")
    if locality.is_outside(projection.covered, projection.discretionary_count, projection.query_size):
        if locality.fallback == "majority":
            label = POSITIVE if model.prevalence >= 0.5 else NEGATIVE
        else:
            if rng is None:
                raise ConfigurationError("bernoulli fallback requires a seeded generator")
            label = POSITIVE if rng.random() < model.prevalence else NEGATIVE
        return DecisionOutcome(label, sup, "locality_fallback")
    return decide_r2(sup, eta)
