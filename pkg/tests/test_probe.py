import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_bundled
from oracles import signature_classes

from hcbr.dataset import NEGATIVE, POSITIVE, Case, FeatureInterner
from hcbr.decision import decide_r1
from hcbr.errors import ConfigurationError, ProbeError
from hcbr.hypergraph import build_partition
from hcbr.metrics import confusion, report
from hcbr.model import fit
from hcbr.probe import (ProbeConfig, bench_build, expected_partition_size, gen_worst_case, min_strength_gap,
                        probe_model_space, strength_scale, write_bench_csv, write_history_csv)


def test_generator_small_instance():
    ds = gen_worst_case(3, 2)
    assert [c.features for c in ds.cases] == [(0, 1, 2), (1, 2, 3), (2, 3, 4)]
    assert [c.label for c in ds.cases] == [NEGATIVE, POSITIVE, NEGATIVE]
    assert [ds.interner.token(i) for i in range(5)] == ["1", "2", "3", "4", "5"]
    assert expected_partition_size(3, 2) == 5


@settings(max_examples=40)
@given(st.integers(1, 25), st.integers(1, 12))
def test_expected_partition_size_matches_brute_force(n, m):
    cases = gen_worst_case(n, m).cases
    assert len(signature_classes(cases)) == expected_partition_size(n, m)


def test_generator_single_case_and_larger_instance():
    part = build_partition(gen_worst_case(1, 4).cases)
    assert len(part) == 1 and part.blocks[0].size == 5
    assert len(build_partition(gen_worst_case(100, 10).cases)) == expected_partition_size(100, 10) == 110


def test_generator_rejects_bad_sizes():
    with pytest.raises(ConfigurationError):
        gen_worst_case(0, 3)


def test_strength_scales():
    mu = np.array([0.1, 0.1, 0.4, -0.2])
    assert strength_scale(mu, "range") == pytest.approx(0.6)
    assert strength_scale(mu, "min_gap") == pytest.approx(0.3)
    assert min_strength_gap(np.array([1.0, 1.0 + 1e-16, 2.0])) == pytest.approx(1.0)
    with pytest.raises(ProbeError):
        strength_scale(np.array([0.2, 0.2]))
    with pytest.raises(ProbeError):
        min_strength_gap(np.array([0.2, 0.2]))
    with pytest.raises(ConfigurationError):
        ProbeConfig(sigma_rule="median")


@pytest.fixture(scope="module")
def heart_model():
    ds = load_bundled("heart")
    train, test = ds.cases[:200], ds.cases[200:]
    return fit(train, ds.interner, 1), train, test


def _training_mcc(model, cases):
    return report(confusion((c.label, decide_r1(model.support_case(c))) for c in cases)).mcc


def test_zero_perturbation_reproduces_model_mcc(heart_model):
    model, train, test = heart_model
    res = probe_model_space(model, train, ProbeConfig(population=4, offspring=4, generations=0), test)
    assert res.base_train_mcc == pytest.approx(_training_mcc(model, train))
    assert res.base_test_mcc == pytest.approx(_training_mcc(model, test))
    assert res.history[0][1] >= res.base_train_mcc


def test_best_fitness_history_never_decreases_and_run_is_deterministic(heart_model):
    model, train, _ = heart_model
    cfg = ProbeConfig(population=12, offspring=12, generations=15, seed=3)
    a = probe_model_space(model, train, cfg)
    b = probe_model_space(model, train, cfg)
    best = [h[1] for h in a.history]
    assert all(y >= x for x, y in zip(best, best[1:]))
    assert len(a.history) == 16
    assert np.array_equal(a.best_delta, b.best_delta) and a.history == b.history
    assert a.best_fitness == pytest.approx(a.final_train_mcc - 0.1 * float(a.best_delta @ a.best_delta))
    assert a.best_fitness >= a.base_train_mcc
    assert a.test_mcc_gain is None
    assert np.all((a.best_nu > 0) & (a.best_nu <= 1))


def test_heavy_penalty_keeps_perturbation_small(heart_model):
    model, train, _ = heart_model
    light = probe_model_space(model, train, ProbeConfig(population=10, offspring=10, generations=10, penalty=0.0))
    heavy = probe_model_space(model, train, ProbeConfig(population=10, offspring=10, generations=10, penalty=1e6))
    assert heavy.best_delta @ heavy.best_delta <= light.best_delta @ light.best_delta
    assert heavy.best_fitness >= heavy.base_train_mcc  # zero perturbation stays in the elite


def test_probe_needs_both_classes():
    cases = [Case(0, (1, 2), POSITIVE), Case(1, (2, 3), NEGATIVE)]
    model = fit(cases, FeatureInterner(), 0)
    with pytest.raises(ProbeError):
        probe_model_space(model, cases[:1])


def test_history_csv():
    buf = io.StringIO()
    write_history_csv([(0, 0.5, 0.25), (1, 0.75, 0.5)], buf)
    assert buf.getvalue().splitlines() == ["generation,max_fitness,mean_fitness", "0,0.5,0.25", "1,0.75,0.5"]


def test_bench_records():
    recs = bench_build([20, 40], [3], repetitions=1)
    assert [(r.n, r.m) for r in recs] == [(20, 3), (40, 3)]
    assert all(r.partition_size == r.expected_size for r in recs)
    assert all(r.build_time > 0 and r.strength_time > 0 for r in recs)
    buf = io.StringIO()
    write_bench_csv(recs, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "N,m,build_time,strength_time,partition_size,expected_size"
    assert len(lines) == 3
    with pytest.raises(ConfigurationError):
        bench_build([], [3])
