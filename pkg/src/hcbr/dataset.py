"""Dataset ingestion: feature interning, tabular/sparse parsers, folds.

Every input row becomes a :class:`Case`, a sorted tuple of dense feature ids
plus a label in {-1, +1}.  Tabular cells are encoded as ``"column=value"``
tokens and sparse pairs as ``"index:value"`` tokens; all values are treated
categorically.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, IngestionError, StratificationError

POSITIVE = 1
NEGATIVE = -1

DEFAULT_MISSING = ("", "?")
DATASET_FORMAT_VERSION = 1


class FeatureInterner:
    """Bijection between feature tokens and contiguous ids."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._tokens: list[str] = []
        for tok in tokens:
            self.intern(tok)

    def intern(self, token: str) -> int:
        fid = self._ids.get(token)
        if fid is None:
            fid = len(self._tokens)
            self._ids[token] = fid
            self._tokens.append(token)
        return fid

    def get(self, token: str) -> int | None:
        return self._ids.get(token)

    def token(self, fid: int) -> str:
        return self._tokens[fid]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureInterner) and self._tokens == other._tokens


@dataclass(frozen=True)
class Case:
    case_id: int
    features: tuple[int, ...]
    label: int | None = None

    def __post_init__(self):
        feats = tuple(sorted(set(self.features)))
        object.__setattr__(self, "features", feats)
        if self.label is not None and self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"label must be -1 or +1, got {self.label!r}")

    def __len__(self) -> int:
        return len(self.features)


@dataclass
class Dataset:
    cases: list[Case]
    interner: FeatureInterner
    source_meta: dict = field(default_factory=dict)

    @property
    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.cases], dtype=np.int8)

    @property
    def n_positive(self) -> int:
        return sum(1 for c in self.cases if c.label == POSITIVE)

    @property
    def prevalence(self) -> float:
        labeled = [c for c in self.cases if c.label is not None]
        if not labeled:
            return 0.0
        return sum(1 for c in labeled if c.label == POSITIVE) / len(labeled)

    def __len__(self) -> int:
        return len(self.cases)

    def subset(self, case_ids: Iterable[int]) -> list[Case]:
        by_id = self._by_id()
        return [by_id[i] for i in case_ids]

    def _by_id(self) -> dict[int, Case]:
        return {c.case_id: c for c in self.cases}


def _label_set(value) -> frozenset[str]:
    if isinstance(value, str):
        return frozenset(t.strip() for t in value.split(","))
    return frozenset(value)


@dataclass(frozen=True)
class CsvConfig:
    label_column: str
    positive: str | Sequence[str] = "+1"
    negative: str | Sequence[str] = "-1"
    missing: Sequence[str] = DEFAULT_MISSING
    delimiter: str = ","
    drop_columns: Sequence[str] = ()
    require_label: bool = True


def parse_csv(stream, config: CsvConfig, interner: FeatureInterner | None = None) -> Dataset:
    """Parse delimiter-separated text with a header row.

    Each non-label cell ``c`` of column ``col`` yields the token ``col=c``;
    cells listed in ``config.missing`` yield nothing.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream, delimiter=config.delimiter, skipinitialspace=True)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise IngestionError("empty input: header row missing") from None
    if config.label_column in header:
        label_idx = header.index(config.label_column)
    elif config.require_label:
        raise ConfigurationError(f"label column {config.label_column!r} not in header {header}")
    else:
        label_idx = None
    skip = {label_idx} | {header.index(c) for c in config.drop_columns if c in header}
    pos, neg = _label_set(config.positive), _label_set(config.negative)
    if pos & neg:
        raise ConfigurationError(f"label tokens overlap: {sorted(pos & neg)}")
    missing = set(config.missing)
    interner = interner if interner is not None else FeatureInterner()

    cases = []
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise IngestionError(f"row {rowno}: expected {len(header)} cells, got {len(row)}")
        raw = row[label_idx].strip() if label_idx is not None else ""
        if not raw and not config.require_label:
            label = None
        else:
            label = _parse_label(raw, pos, neg, f"row {rowno}")
        feats = []
        for j, cell in enumerate(row):
            if j in skip:
                continue
            cell = cell.strip()
            if cell in missing:
                continue
            feats.append(interner.intern(f"{header[j]}={cell}"))
        if not feats:
            raise IngestionError(f"row {rowno}: no features left after missing-value removal")
        cases.append(Case(len(cases), tuple(feats), label))
    meta = {
        "format": "csv",
        "label_column": config.label_column,
        "positive": sorted(pos),
        "negative": sorted(neg),
        "missing": sorted(missing),
        "delimiter": config.delimiter,
        "columns": [h for j, h in enumerate(header) if j not in skip],
    }
    return Dataset(cases, interner, meta)


def parse_sparse(stream, positive="+1", negative="-1", interner: FeatureInterner | None = None) -> Dataset:
    """Parse ``label idx:val idx:val ...`` lines (LIBSVM-style, values categorical)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    pos, neg = _label_set(positive), _label_set(negative)
    interner = interner if interner is not None else FeatureInterner()
    cases = []
    for lineno, line in enumerate(stream, start=1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        label = _parse_label(parts[0], pos, neg, f"line {lineno}")
        feats = []
        for pair in parts[1:]:
            idx, sep, val = pair.partition(":")
            if not sep or not idx or not val:
                raise IngestionError(f"line {lineno}: malformed pair {pair!r}")
            feats.append(interner.intern(f"{idx}:{val}"))
        if not feats:
            raise IngestionError(f"line {lineno}: case has no features")
        cases.append(Case(len(cases), tuple(feats), label))
    meta = {"format": "sparse", "positive": sorted(pos), "negative": sorted(neg)}
    return Dataset(cases, interner, meta)


def _parse_label(token: str, pos, neg, where: str) -> int:
    if token in pos:
        return POSITIVE
    if token in neg:
        return NEGATIVE
    # tolerate numeric spellings such as "1" vs "+1"
    try:
        num = float(token)
    except ValueError:
        num = None
    if num is not None:
        for cand in pos:
            if _same_number(cand, num):
                return POSITIVE
        for cand in neg:
            if _same_number(cand, num):
                return NEGATIVE
    raise IngestionError(f"{where}: unknown label token {token!r}")


def _same_number(token: str, num: float) -> bool:
    try:
        return float(token) == num
    except ValueError:
        return False


def intern_query(tokens: Iterable[str], interner: FeatureInterner) -> tuple[tuple[int, ...], int]:
    """Map raw tokens onto known ids; return (known ids, count of unknown tokens)."""
    known, unknown = set(), set()
    for tok in tokens:
        fid = interner.get(tok)
        if fid is None:
            unknown.add(tok)
        else:
            known.add(fid)
    return tuple(sorted(known)), len(unknown)


# ----------------------------------------------------------------------------
# folds
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignments: dict[int, int]

    def fold(self, index: int) -> list[int]:
        return [cid for cid, f in self.assignments.items() if f == index]

    def split(self, index: int) -> tuple[list[int], list[int]]:
        """Return (train ids, test ids) for fold ``index``, both in case-id order."""
        train, test = [], []
        for cid in sorted(self.assignments):
            (test if self.assignments[cid] == index else train).append(cid)
        return train, test

    def __iter__(self) -> Iterator[tuple[list[int], list[int]]]:
        for i in range(self.k):
            yield self.split(i)


def stratified_folds(cases: Sequence[Case] | Dataset, k: int, seed: int) -> FoldPlan:
    """Seeded per-class shuffle followed by round-robin fold assignment.

    The round-robin offset carries over from one class to the next so that
    total fold sizes also stay within one of each other.
    """
    if isinstance(cases, Dataset):
        cases = cases.cases
    if k < 2:
        raise StratificationError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    assignments: dict[int, int] = {}
    offset = 0
    for label in (POSITIVE, NEGATIVE):
        ids = [c.case_id for c in cases if c.label == label]
        if len(ids) < k:
            raise StratificationError(f"class {label:+d} has {len(ids)} cases, fewer than k={k}")
        order = rng.permutation(len(ids))
        for pos, j in enumerate(order):
            assignments[ids[j]] = (offset + pos) % k
        offset = (offset + len(ids)) % k
    if any(c.label is None for c in cases):
        raise StratificationError("stratification requires labeled cases")
    return FoldPlan(k, seed, dict(sorted(assignments.items())))


def stratified_subsample(cases: Sequence[Case], fraction: float, rng: np.random.Generator) -> tuple[list[Case], list[Case]]:
    """Split cases into (train, rest) keeping each class's share at ``fraction``."""
    train, rest = [], []
    for label in (POSITIVE, NEGATIVE):
        group = [c for c in cases if c.label == label]
        n_take = int(round(fraction * len(group)))
        picked = set(rng.permutation(len(group))[:n_take].tolist())
        for j, c in enumerate(group):
            (train if j in picked else rest).append(c)
    train.sort(key=lambda c: c.case_id)
    rest.sort(key=lambda c: c.case_id)
    return train, rest


# ----------------------------------------------------------------------------
# duplicate signatures
# ----------------------------------------------------------------------------


@dataclass
class DuplicateIndex:
    groups: dict[tuple[int, ...], Counter]

    @property
    def total(self) -> int:
        return sum(sum(c.values()) for c in self.groups.values())

    def is_redundant(self, signature: tuple[int, ...]) -> bool:
        counts = self.groups.get(signature)
        return counts is not None and counts[POSITIVE] > 0 and counts[NEGATIVE] > 0

    def redundant_signatures(self) -> list[tuple[int, ...]]:
        return [s for s in self.groups if self.is_redundant(s)]

    def redundant_case_count(self) -> int:
        return sum(sum(self.groups[s].values()) for s in self.redundant_signatures())

    def redundant_prevalence(self) -> float | None:
        """Share of +1 among all occurrences of redundant signatures."""
        pos = tot = 0
        for s in self.redundant_signatures():
            pos += self.groups[s][POSITIVE]
            tot += sum(self.groups[s].values())
        return pos / tot if tot else None


def duplicate_index(cases: Sequence[Case] | Dataset) -> DuplicateIndex:
    if isinstance(cases, Dataset):
        cases = cases.cases
    groups: dict[tuple[int, ...], Counter] = {}
    for c in cases:
        if c.label is None:
            raise IngestionError(f"case {c.case_id} is unlabeled")
        groups.setdefault(c.features, Counter())[c.label] += 1
    return DuplicateIndex(groups)


# ----------------------------------------------------------------------------
# cache container
# ----------------------------------------------------------------------------


def dataset_to_document(ds: Dataset) -> str:
    doc = {
        "kind": "hcbr-dataset",
        "version": DATASET_FORMAT_VERSION,
        "source_meta": ds.source_meta,
        "features": ds.interner.tokens,
        "cases": [[c.case_id, c.label, list(c.features)] for c in ds.cases],
    }
    return json.dumps(doc, separators=(",", ":"))


def dataset_from_document(text: str) -> Dataset:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestionError(f"dataset cache is not valid JSON: {exc}") from None
    if doc.get("kind") != "hcbr-dataset" or doc.get("version") != DATASET_FORMAT_VERSION:
        raise IngestionError("unsupported dataset cache (kind/version mismatch)")
    interner = FeatureInterner(doc["features"])
    if len(interner) != len(doc["features"]):
        raise IngestionError("duplicate tokens in dataset cache")
    n = len(interner)
    cases = []
    for cid, label, feats in doc["cases"]:
        if any(f < 0 or f >= n for f in feats):
            raise IngestionError(f"case {cid}: feature id out of range")
        cases.append(Case(cid, tuple(feats), label))
    return Dataset(cases, interner, doc.get("source_meta", {}))
