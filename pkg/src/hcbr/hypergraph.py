"""Intersection partition of a case hypergraph.

Each training case is a hyperedge over the feature universe.  The blocks of
the partition are the maximal groups of features that occur in exactly the
same training cases; they are obtained by partition refinement, inserting
cases one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import POSITIVE, Case
from .errors import BuildError, ProjectionError


@dataclass
class Block:
    block_id: int
    features: frozenset[int]
    members_pos: list[int]
    members_neg: list[int]

    @property
    def size(self) -> int:
        return len(self.features)

    @property
    def degree_pos(self) -> int:
        return len(self.members_pos)

    @property
    def degree_neg(self) -> int:
        return len(self.members_neg)

    def degree(self, label: int) -> int:
        return self.degree_pos if label == POSITIVE else self.degree_neg


@dataclass(frozen=True)
class Projection:
    """Blocks hit by a query, with the number of query features in each."""

    block_ids: np.ndarray
    sizes: np.ndarray
    discretionary_count: int
    query_size: int

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.block_ids.tolist(), self.sizes.tolist()))

    @property
    def covered(self) -> int:
        """|x ∩ F_X|, the number of query features known to the partition."""
        return self.query_size - self.discretionary_count

    @property
    def weights(self) -> np.ndarray:
        return self.sizes / self.query_size


class Partition:
    """Immutable result of :func:`build_partition`."""

    def __init__(self, blocks: list[Block], feature_to_block: dict[int, int],
                 case_projections: dict[int, np.ndarray], case_sizes: dict[int, int]):
        self.blocks = blocks
        self.feature_to_block = feature_to_block
        self.case_projections = case_projections
        self.case_sizes = case_sizes
        self.sizes = np.array([b.size for b in blocks], dtype=np.int64)
        self.degrees_pos = np.array([b.degree_pos for b in blocks], dtype=np.int64)
        self.degrees_neg = np.array([b.degree_neg for b in blocks], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def n_features(self) -> int:
        """|F_X|."""
        return len(self.feature_to_block)

    def block_sets(self) -> set[frozenset[int]]:
        return {b.features for b in self.blocks}

    def project(self, features: Iterable[int], unknown: int = 0) -> Projection:
        """Project a feature set on the partition.

        ``features`` may contain ids never seen in training; those, plus the
        explicit ``unknown`` count (tokens that could not even be interned),
        are the query's discretionary features.
        """
        feats = set(features)
        query_size = len(feats) + unknown
        if query_size == 0:
            raise ProjectionError("cannot project an empty feature set")
        hits: dict[int, int] = {}
        discretionary = unknown
        f2b = self.feature_to_block
        for f in feats:
            b = f2b.get(f)
            if b is None:
                discretionary += 1
            else:
                hits[b] = hits.get(b, 0) + 1
        ids = np.fromiter(sorted(hits), dtype=np.int64, count=len(hits))
        sizes = np.fromiter((hits[b] for b in ids.tolist()), dtype=np.int64, count=len(hits))
        return Projection(ids, sizes, discretionary, query_size)

    def training_projection(self, case_id: int) -> Projection:
        ids = self.case_projections[case_id]
        return Projection(ids, self.sizes[ids], 0, self.case_sizes[case_id])


def build_partition(cases: Sequence[Case]) -> Partition:
    """Build the intersection partition by refinement.

    For each inserted case, every existing block it touches splits into the
    touched part and the rest (when both are non-empty); features never seen
    before form one new block.  The touched part gets a fresh id, the rest
    keeps the old one.  Work per case is proportional to its size.
    """
    if not cases:
        raise BuildError("cannot build a partition from zero cases")
    f2b: dict[int, int] = {}
    block_features: list[set[int]] = []

    for case in cases:
        if case.label is None:
            raise BuildError(f"case {case.case_id} is unlabeled")
        if not case.features:
            raise BuildError(f"case {case.case_id} has no features")
        touched: dict[int, list[int]] = {}
        fresh = []
        for f in case.features:
            b = f2b.get(f)
            if b is None:
                fresh.append(f)
            else:
                touched.setdefault(b, []).append(f)
        for b, feats in touched.items():
            if len(feats) == len(block_features[b]):
                continue
            new_id = len(block_features)
            block_features[b].difference_update(feats)
            block_features.append(set(feats))
            for f in feats:
                f2b[f] = new_id
        if fresh:
            new_id = len(block_features)
            block_features.append(set(fresh))
            for f in fresh:
                f2b[f] = new_id

    members_pos: list[list[int]] = [[] for _ in block_features]
    members_neg: list[list[int]] = [[] for _ in block_features]
    projections: dict[int, np.ndarray] = {}
    case_sizes: dict[int, int] = {}
    for case in cases:
        ids = sorted({f2b[f] for f in case.features})
        projections[case.case_id] = np.array(ids, dtype=np.int64)
        case_sizes[case.case_id] = len(case.features)
        target = members_pos if case.label == POSITIVE else members_neg
        for b in ids:
            target[b].append(case.case_id)

    blocks = [
        Block(i, frozenset(fs), members_pos[i], members_neg[i])
        for i, fs in enumerate(block_features)
    ]
    return Partition(blocks, f2b, projections, case_sizes)


__all__ = ["Block", "Partition", "Projection", "build_partition"]
