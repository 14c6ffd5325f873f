from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from hcbr.dataset import Case, CsvConfig, Dataset, FeatureInterner, parse_csv

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

DATA_DIR = Path(__file__).parent / "data"

# label tokens of the bundled datasets: (positive, negative)
DATASETS = {
    "mushrooms": ("e", "p"),
    "breast": ("malignant", "benign"),
    "heart": ("2", "1"),
    "splice": ("EI,IE", "N"),
}

_CACHE: dict[str, Dataset] = {}


def load_bundled(name: str) -> Dataset:
    if name not in _CACHE:
        pos, neg = DATASETS[name]
        with open(DATA_DIR / f"{name}.csv", newline="") as fh:
            _CACHE[name] = parse_csv(fh, CsvConfig("class", pos, neg))
    return _CACHE[name]


# the three-case instance used throughout the worked example: seven blocks
# with sizes (2,1,2,3,1,2,3) over 14 features
EXAMPLE_BLOCKS = [
    frozenset({0, 1}), frozenset({2}), frozenset({3, 4}), frozenset({5, 6, 7}),
    frozenset({8}), frozenset({9, 10}), frozenset({11, 12, 13}),
]
EXAMPLE_MEMBERSHIP = [(0, 1, 2, 5), (2, 4, 5, 6), (1, 2, 3, 4)]
EXAMPLE_LABELS = [1, -1, 1]


def example_cases() -> list[Case]:
    cases = []
    for cid, (blocks, label) in enumerate(zip(EXAMPLE_MEMBERSHIP, EXAMPLE_LABELS)):
        feats = sorted(f for b in blocks for f in EXAMPLE_BLOCKS[b])
        cases.append(Case(cid, tuple(feats), label))
    return cases


@pytest.fixture
def worked_example():
    cases = example_cases()
    interner = FeatureInterner(f"f{i}" for i in range(14))
    return Dataset(cases, interner, {"source": "worked example"})


def block_order(partition) -> list[int]:
    """Block ids of a partition listed in the worked example's e1..e7 order."""
    by_set = {b.features: b.block_id for b in partition.blocks}
    return [by_set[s] for s in EXAMPLE_BLOCKS]


def random_instance(rng: np.random.Generator, n_cases: int, n_features: int, density: float = 0.3,
                    both_labels: bool = True) -> list[Case]:
    cases = []
    for i in range(n_cases):
        mask = rng.random(n_features) < density
        if not mask.any():
            mask[rng.integers(n_features)] = True
        label = 1 if rng.random() < 0.5 else -1
        cases.append(Case(i, tuple(np.flatnonzero(mask).tolist()), label))
    if both_labels and n_cases >= 2:
        labels = {c.label for c in cases}
        if len(labels) == 1:
            c = cases[0]
            cases[0] = Case(c.case_id, c.features, -c.label)
    return cases


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
