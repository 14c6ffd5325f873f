import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import metric_formulas

from hcbr.dataset import NEGATIVE, POSITIVE
from hcbr.decision import ABSTAIN
from hcbr.errors import MetricsError
from hcbr.metrics import (ConfusionMatrix, aggregate, calibration_histogram, confusion, dominates,
                          mcc_from_labels, pareto_frontier, report)

counts = st.integers(0, 500)


def test_confusion_counts():
    recs = [(1, 1), (1, 1), (1, -1), (-1, 1), (-1, -1), (-1, -1), (-1, -1)]
    assert confusion(recs) == ConfusionMatrix(2, 1, 1, 3)


def test_confusion_rejects_abstentions_and_empty_input():
    with pytest.raises(MetricsError):
        confusion([(POSITIVE, ABSTAIN)])
    with pytest.raises(MetricsError):
        confusion([])
    with pytest.raises(MetricsError):
        confusion([(2, 1)])


def test_reference_average_matrices():
    breast = report(ConfusionMatrix(23.0, 1.4, 0.7, 43.9))
    assert breast.accuracy == pytest.approx(0.9696, abs=1e-4)
    adult = report(ConfusionMatrix(2182.4, 295.3, 288.5, 488.8))
    assert adult.accuracy == pytest.approx(0.8206, abs=1e-4)


def test_zero_denominators_give_zero():
    r = report(ConfusionMatrix(0, 0, 0, 10))
    assert (r.precision, r.recall, r.f1, r.mcc) == (0.0, 0.0, 0.0, 0.0)
    assert r.specificity == 1.0 and r.accuracy == 1.0
    with pytest.raises(MetricsError):
        report(ConfusionMatrix())


@given(counts, counts, counts, counts)
def test_report_matches_formula_oracle(tp, fn, fp, tn):
    if tp + fn + fp + tn == 0:
        return
    got = report(ConfusionMatrix(tp, fn, fp, tn)).as_dict()
    for k, v in metric_formulas(tp, fn, fp, tn).items():
        assert got[k] == pytest.approx(v, abs=1e-12)
    assert -1 <= got["mcc"] <= 1


@given(counts, counts, counts, counts)
def test_mcc_is_symmetric_under_class_swap(tp, fn, fp, tn):
    if tp + fn + fp + tn == 0:
        return
    a = report(ConfusionMatrix(tp, fn, fp, tn)).mcc
    b = report(ConfusionMatrix(tn, fp, fn, tp)).mcc
    assert a == pytest.approx(b, abs=1e-12)


@given(st.lists(st.tuples(st.sampled_from([1, -1]), st.sampled_from([1, -1])), min_size=1, max_size=60))
def test_vectorised_mcc_matches_matrix_mcc(pairs):
    import numpy as np

    y, p = np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])
    assert mcc_from_labels(y, p) == pytest.approx(report(confusion(pairs)).mcc, abs=1e-12)


def test_aggregate_reports_both_averages():
    ms = [ConfusionMatrix(10, 0, 0, 10), ConfusionMatrix(5, 5, 5, 5)]
    doc = aggregate(ms)
    assert doc["mean_of_folds"]["accuracy"] == pytest.approx(0.75)
    assert doc["pooled"]["accuracy"] == pytest.approx(30 / 40)
    assert doc["average_matrix"] == {"tp": 7.5, "fn": 2.5, "fp": 2.5, "tn": 7.5}
    assert doc["std_of_folds"]["accuracy"] == pytest.approx(0.25)
    with pytest.raises(MetricsError):
        aggregate([])


def test_histogram_bins_symmetric_range():
    h = calibration_histogram([(-1.0, True), (-0.1, False), (0.1, True), (1.0, True)], bins=4)
    assert h.edges.tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert h.correct.tolist() == [1, 0, 1, 1]
    assert h.incorrect.tolist() == [0, 1, 0, 0]
    assert h.total == 4


def test_histogram_all_zero_supports_and_errors():
    h = calibration_histogram([(0.0, True), (0.0, False)], bins=2)
    assert h.edges.tolist() == [-1.0, 0.0, 1.0]
    assert h.correct.tolist() == [0, 1]
    with pytest.raises(MetricsError):
        calibration_histogram([], 10)
    with pytest.raises(MetricsError):
        calibration_histogram([(0.1, True)], 1)


@given(st.lists(st.tuples(st.floats(-5, 5), st.booleans()), min_size=1, max_size=80), st.integers(2, 30))
def test_histogram_counts_every_prediction(data, bins):
    h = calibration_histogram(data, bins)
    assert h.total == len(data)
    assert int(h.correct.sum()) == sum(ok for _, ok in data)


def test_pareto_examples():
    pts = [(0.9, 0.5), (0.8, 0.9), (0.85, 0.4), (0.9, 0.5), (1.0, 0.1)]
    assert pareto_frontier(pts) == [(0.9, 0.5), (0.8, 0.9), (1.0, 0.1)]
    assert dominates((1, 1), (1, 0)) and not dominates((1, 1), (1, 1))


@given(st.lists(st.tuples(st.integers(0, 10), st.integers(0, 10)), min_size=1, max_size=40))
def test_pareto_frontier_is_exactly_the_undominated_set(pts):
    front = pareto_frontier(pts)
    assert front
    for p in front:
        assert not any(dominates(q, p) for q in pts)
    for p in set(pts) - set(front):
        assert any(dominates(q, p) for q in front)
    assert not any(math.isnan(x) for p in front for x in p)
