import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import EXAMPLE_BLOCKS, example_cases, random_instance
from oracles import signature_classes

from hcbr.dataset import Case
from hcbr.errors import BuildError, ProjectionError
from hcbr.hypergraph import build_partition


def test_worked_example_blocks():
    part = build_partition(example_cases())
    assert part.block_sets() == set(EXAMPLE_BLOCKS)
    assert part.n_features == 14
    by_set = {b.features: b for b in part.blocks}
    assert [by_set[s].degree_pos for s in EXAMPLE_BLOCKS] == [1, 2, 2, 1, 1, 1, 0]
    assert [by_set[s].degree_neg for s in EXAMPLE_BLOCKS] == [0, 0, 1, 0, 1, 1, 1]


def test_generator_instance_blocks():
    # cases {1,2,3}, {2,3,4}, {3,4,5}
    cases = [Case(0, (1, 2, 3), -1), Case(1, (2, 3, 4), 1), Case(2, (3, 4, 5), -1)]
    part = build_partition(cases)
    assert part.block_sets() == {frozenset({f}) for f in range(1, 6)}


@given(st.integers(1, 12), st.integers(1, 40), st.floats(0.05, 0.8), st.integers(0, 2**31))
def test_blocks_equal_membership_signature_classes(n_cases, n_features, density, seed):
    cases = random_instance(np.random.default_rng(seed), n_cases, n_features, density)
    part = build_partition(cases)
    assert part.block_sets() == signature_classes(cases)


@given(st.integers(1, 10), st.integers(1, 25), st.integers(0, 2**31))
def test_insertion_order_does_not_change_blocks(n_cases, n_features, seed):
    rng = np.random.default_rng(seed)
    cases = random_instance(rng, n_cases, n_features)
    shuffled = [cases[i] for i in rng.permutation(n_cases)]
    assert build_partition(cases).block_sets() == build_partition(shuffled).block_sets()


@given(st.integers(1, 10), st.integers(1, 25), st.integers(0, 2**31))
def test_blocks_cover_features_and_degrees_are_positive(n_cases, n_features, seed):
    cases = random_instance(np.random.default_rng(seed), n_cases, n_features)
    part = build_partition(cases)
    union = set().union(*(set(c.features) for c in cases))
    assert sum(b.size for b in part.blocks) == len(union) == part.n_features
    assert all(b.degree_pos + b.degree_neg >= 1 for b in part.blocks)
    for c in cases:
        proj = part.training_projection(c.case_id)
        assert proj.discretionary_count == 0
        assert proj.weights.sum() == pytest.approx(1.0)
        # a training case contains every block it touches
        for b in proj.block_ids:
            assert part.blocks[b].features <= set(c.features)


def test_projection_of_new_case_counts_discretionary_features():
    part = build_partition(example_cases())
    proj = part.project([0, 2, 99, 100], unknown=1)
    assert proj.query_size == 5
    assert proj.discretionary_count == 3
    assert proj.covered == 2
    assert sorted(proj.sizes.tolist()) == [1, 1]
    assert proj.weights.sum() == pytest.approx(2 / 5)


def test_build_errors():
    with pytest.raises(BuildError):
        build_partition([])
    with pytest.raises(BuildError):
        build_partition([Case(0, (1,), None)])
    with pytest.raises(BuildError):
        build_partition([Case(0, (), 1)])
    with pytest.raises(ProjectionError):
        build_partition(example_cases()).project([])
