"""Independent reference implementations used as test oracles.

These are deliberately naive: quadratic loops, exact fractions, no shared
code with the library beyond the Case container.
"""

from __future__ import annotations

import math
from fractions import Fraction


def signature_classes(cases) -> set[frozenset[int]]:
    """Group features by the exact set of cases containing them."""
    members: dict[int, set[int]] = {}
    for c in cases:
        for f in c.features:
            members.setdefault(f, set()).add(c.case_id)
    groups: dict[frozenset[int], set[int]] = {}
    for f, who in members.items():
        groups.setdefault(frozenset(who), set()).add(f)
    return {frozenset(g) for g in groups.values()}


def exact_strengths(cases, blocks: list[frozenset[int]]) -> tuple[list[Fraction], list[Fraction]]:
    """Normalized class strengths from the definition, in exact arithmetic.

    ``blocks`` fixes the output order.
    """
    n_features = sum(len(b) for b in blocks)
    out = []
    for label in (1, -1):
        degree = [sum(1 for c in cases if c.label == label and b <= set(c.features)) for b in blocks]
        raw = []
        for i, b in enumerate(blocks):
            total = Fraction(0)
            for c in cases:
                feats = set(c.features)
                if not b <= feats:
                    continue
                denom = sum(degree[j] * len(blocks[j] & feats) for j in range(len(blocks)))
                if denom:
                    total += Fraction(degree[i] * len(b & feats), denom)
            raw.append(Fraction(len(b), n_features) * total)
        s = sum(raw)
        out.append([r / s for r in raw])
    return out[0], out[1]


def exact_support(features, blocks, mu_pos, mu_neg) -> Fraction:
    feats = set(features)
    return sum((Fraction(len(b & feats), len(feats)) * (mp - mn)
                for b, mp, mn in zip(blocks, mu_pos, mu_neg)), Fraction(0))


def metric_formulas(tp, fn, fp, tn) -> dict:
    def div(a, b):
        return a / b if b else 0.0

    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return {
        "accuracy": (tp + tn) / (tp + fn + fp + tn),
        "recall": div(tp, tp + fn),
        "specificity": div(tn, tn + fp),
        "precision": div(tp, tp + fp),
        "npv": div(tn, tn + fn),
        "f1": div(2 * tp, 2 * tp + fp + fn),
        "mcc": div(tp * tn - fp * fn, den),
    }
