"""Class strengths over the partition, case support, training and model I/O."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import NEGATIVE, POSITIVE, Case, FeatureInterner
from .errors import ConfigurationError, DegenerateNormalizationError, ModelFormatError
from .hypergraph import Block, Partition, Projection, build_partition

MODEL_FORMAT_VERSION = 1


@dataclass
class StrengthVectors:
    mu_pos: np.ndarray
    mu_neg: np.ndarray
    trained_iterations: int = 0

    @property
    def mu(self) -> np.ndarray:
        return self.mu_pos - self.mu_neg

    def copy(self) -> "StrengthVectors":
        return StrengthVectors(self.mu_pos.copy(), self.mu_neg.copy(), self.trained_iterations)


@dataclass
class Contribution:
    block_id: int
    weight: float
    mu: float

    @property
    def value(self) -> float:
        return self.weight * self.mu


@dataclass
class SupportBreakdown:
    s_pos: float
    s_neg: float
    coverage: float
    contributions: list[Contribution] = field(default_factory=list)

    @property
    def s(self) -> float:
        return self.s_pos - self.s_neg

    @property
    def confidence_ratio(self) -> float | None:
        """max(s_pos, s_neg) / (s_pos + s_neg); None when the denominator is 0."""
        total = self.s_pos + self.s_neg
        if total == 0:
            return None
        return max(self.s_pos, self.s_neg) / total


def _class_strength(partition: Partition, degrees: np.ndarray, cases: Sequence[Case]) -> np.ndarray:
    """Unnormalized strength S^(l) of every block for one label.

    For a training case x, block e of its projection receives
    d(e)|e| / sum_{e' in pi(x)} d(e')|e'|; each block sums that share over
    every training case containing it (regardless of label) and is scaled by
    |e| / |F_X|.
    """
    sizes = partition.sizes.astype(float)
    mass = degrees * sizes
    acc = np.zeros(len(partition))
    for case in cases:
        ids = partition.case_projections[case.case_id]
        m = mass[ids]
        denom = m.sum()
        if denom > 0:
            acc[ids] += m / denom
    return sizes / partition.n_features * acc


def compute_strengths(partition: Partition, cases: Sequence[Case]) -> StrengthVectors:
    s_pos = _class_strength(partition, partition.degrees_pos.astype(float), cases)
    s_neg = _class_strength(partition, partition.degrees_neg.astype(float), cases)
    tot_pos, tot_neg = s_pos.sum(), s_neg.sum()
    if tot_pos <= 0 or tot_neg <= 0:
        missing = "+1" if tot_pos <= 0 else "-1"
        raise DegenerateNormalizationError(
            f"training set has no class {missing} cases; strengths cannot be normalized")
    return StrengthVectors(s_pos / tot_pos, s_neg / tot_neg)


class HCBRModel:
    """A fitted partition with its class-strength vectors.

    Treat instances as immutable: :func:`train` returns a new model.
    """

    def __init__(self, interner: FeatureInterner, partition: Partition,
                 strengths: StrengthVectors, prevalence: float, config: dict | None = None):
        self.interner = interner
        self.partition = partition
        self.strengths = strengths
        self.prevalence = prevalence
        self.config = dict(config or {})

    @property
    def mu_pos(self) -> np.ndarray:
        return self.strengths.mu_pos

    @property
    def mu_neg(self) -> np.ndarray:
        return self.strengths.mu_neg

    @property
    def mu(self) -> np.ndarray:
        return self.strengths.mu

    def __len__(self) -> int:
        return len(self.partition)

    def project(self, case: Case | Iterable[int], unknown: int = 0) -> Projection:
        feats = case.features if isinstance(case, Case) else case
        return self.partition.project(feats, unknown)

    def project_tokens(self, tokens: Iterable[str]) -> Projection:
        known, unknown = [], 0
        for tok in set(tokens):
            fid = self.interner.get(tok)
            if fid is None:
                unknown += 1
            else:
                known.append(fid)
        return self.partition.project(known, unknown)

    def support(self, projection: Projection, explain: bool = True) -> SupportBreakdown:
        return support(self.strengths, projection, explain)

    def support_case(self, case: Case, explain: bool = False) -> SupportBreakdown:
        return support(self.strengths, self.project(case), explain)

    def weight_matrix(self, cases: Sequence[Case]):
        """Sparse case-by-block matrix of weights |x ∩ e| / |x|."""
        from scipy import sparse

        rows, cols, vals = [], [], []
        for i, c in enumerate(cases):
            p = self.project(c)
            rows.extend([i] * len(p.block_ids))
            cols.extend(p.block_ids.tolist())
            vals.extend(p.weights.tolist())
        return sparse.csr_matrix((vals, (rows, cols)), shape=(len(cases), len(self.partition)))


def support(strengths: StrengthVectors, projection: Projection, explain: bool = True) -> SupportBreakdown:
    ids = projection.block_ids
    if len(ids) == 0:
        return SupportBreakdown(0.0, 0.0, 0.0, [])
    w = projection.weights
    s_pos = float(w @ strengths.mu_pos[ids])
    s_neg = float(w @ strengths.mu_neg[ids])
    coverage = 1.0 - projection.discretionary_count / projection.query_size
    contribs = []
    if explain:
        mu = strengths.mu_pos[ids] - strengths.mu_neg[ids]
        contribs = [Contribution(int(b), float(wi), float(m)) for b, wi, m in zip(ids, w, mu)]
        contribs.sort(key=lambda c: -abs(c.value))
    return SupportBreakdown(s_pos, s_neg, coverage, contribs)


def train(model: HCBRModel, cases: Sequence[Case], k: int) -> HCBRModel:
    """Run ``k`` passes of the misclassification-driven strength update.

    Cases are visited in the given order and updates apply immediately.  For
    a misclassified case every block of its projection moves by
    w(e, x)·|mu(e)| toward the true class (added to the true class vector,
    subtracted from the predicted one), with |mu(e)| read before the case's
    own update.  Ties (s = 0) predict -1.
    """
    if k < 0:
        raise ConfigurationError(f"training iterations must be >= 0, got {k}")
    sv = model.strengths.copy()
    mu_pos, mu_neg = sv.mu_pos, sv.mu_neg
    prepared = []
    for c in cases:
        p = model.partition.training_projection(c.case_id) if c.case_id in model.partition.case_projections \
            else model.project(c)
        prepared.append((p.block_ids, p.weights, c.label))
    for _ in range(k):
        for ids, w, y in prepared:
            # same evaluation order as support() so exact ties agree on the sign
            s = float(w @ mu_pos[ids]) - float(w @ mu_neg[ids])
            predicted = POSITIVE if s > 0 else NEGATIVE
            if predicted == y:
                continue
            step = w * np.abs(mu_pos[ids] - mu_neg[ids])
            if y == POSITIVE:
                mu_pos[ids] += step
                mu_neg[ids] -= step
            else:
                mu_neg[ids] += step
                mu_pos[ids] -= step
        sv.trained_iterations += 1
    config = dict(model.config, iterations=sv.trained_iterations)
    return HCBRModel(model.interner, model.partition, sv, model.prevalence, config)


def fit(cases: Sequence[Case], interner: FeatureInterner, iterations: int = 1,
        config: dict | None = None) -> HCBRModel:
    """Build the partition, compute strengths and train in one go."""
    cases = list(cases)
    partition = build_partition(cases)
    strengths = compute_strengths(partition, cases)
    prevalence = sum(1 for c in cases if c.label == POSITIVE) / len(cases)
    model = HCBRModel(interner, partition, strengths, prevalence, dict(config or {}, iterations=0))
    return train(model, cases, iterations)


# ----------------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------------


def _checksum(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def serialize_model(model: HCBRModel) -> str:
    """Versioned JSON document; floats use repr so the round trip is exact."""
    if len(model.partition) == 0:
        raise ModelFormatError("refusing to save a model with zero blocks")
    tokens = model.interner.tokens
    blocks = []
    for b in model.partition.blocks:
        blocks.append({
            "features": sorted(tokens[f] for f in b.features),
            "degree_pos": b.degree_pos,
            "degree_neg": b.degree_neg,
        })
    payload = {
        "features": tokens,
        "blocks": blocks,
        "mu_pos": [float(v) for v in model.mu_pos],
        "mu_neg": [float(v) for v in model.mu_neg],
        "trained_iterations": model.strengths.trained_iterations,
        "prevalence": model.prevalence,
        "config": model.config,
    }
    doc = {
        "kind": "hcbr-model",
        "version": MODEL_FORMAT_VERSION,
        "checksum": _checksum(payload),
        "payload": payload,
    }
    return json.dumps(doc, indent=1)


def deserialize_model(text: str) -> HCBRModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("kind") != "hcbr-model":
        raise ModelFormatError("not a model document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    payload = doc.get("payload")
    if not isinstance(payload, dict) or _checksum(payload) != doc.get("checksum"):
        raise ModelFormatError("checksum mismatch")

    interner = FeatureInterner(payload["features"])
    if len(interner) != len(payload["features"]):
        raise ModelFormatError("duplicate feature tokens")
    n_blocks = len(payload["blocks"])
    if n_blocks == 0 or len(payload["mu_pos"]) != n_blocks or len(payload["mu_neg"]) != n_blocks:
        raise ModelFormatError("block / strength vector length mismatch")
    f2b: dict[int, int] = {}
    blocks = []
    for i, b in enumerate(payload["blocks"]):
        feats = []
        for tok in b["features"]:
            fid = interner.get(tok)
            if fid is None or fid in f2b:
                raise ModelFormatError(f"block {i}: unknown or repeated feature {tok!r}")
            f2b[fid] = i
            feats.append(fid)
        if not feats or b["degree_pos"] + b["degree_neg"] < 1:
            raise ModelFormatError(f"block {i}: empty block or zero degree")
        # member ids are not persisted; placeholder lists preserve the degrees
        blocks.append(Block(i, frozenset(feats), [-1] * b["degree_pos"], [-1] * b["degree_neg"]))
    partition = Partition(blocks, f2b, {}, {})
    sv = StrengthVectors(np.array(payload["mu_pos"], dtype=float),
                         np.array(payload["mu_neg"], dtype=float),
                         int(payload["trained_iterations"]))
    return HCBRModel(interner, partition, sv, float(payload["prevalence"]), payload.get("config", {}))
