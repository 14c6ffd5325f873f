import io

import numpy as np
import pytest

from conftest import load_bundled, random_instance

from hcbr.dataset import Dataset, FeatureInterner, stratified_folds
from hcbr.decision import EtaConfig
from hcbr.errors import ConfigurationError
from hcbr.evaluation import (PREDICTION_HEADER, ExperimentConfig, evaluate_fold, learning_curve, run_cv,
                             write_curve_csv, write_cv_outputs, write_predictions_csv)
from hcbr.model import fit


@pytest.fixture(scope="module")
def toy():
    cases = random_instance(np.random.default_rng(1), 40, 30, 0.25)
    return Dataset(cases, FeatureInterner(f"t{i}" for i in range(30)), {"source": "toy"})


def test_two_fold_run_predicts_every_case_once(toy):
    res = run_cv(ExperimentConfig(folds=2, seed=0), toy)
    ids = sorted(p.case_id for p in res.predictions)
    assert ids == sorted(c.case_id for c in toy.cases)
    assert len(res.folds) == 2 and res.coverage == 1.0
    acc = res.summary()["mean_of_folds"]["accuracy"]
    assert 0 <= acc <= 1 and res.accuracy == acc


def test_fold_uses_only_its_training_cases(toy):
    cfg = ExperimentConfig(folds=4, seed=3)
    plan = stratified_folds(toy, 4, 3)
    by_id = {c.case_id: c for c in toy.cases}
    for k in range(4):
        tr, te = plan.split(k)
        assert not set(tr) & set(te)
        result = evaluate_fold(toy, plan, k, cfg)
        assert result.n_train == len(tr)
        model = fit([by_id[i] for i in tr], toy.interner, cfg.iterations)
        for p in result.predictions:
            assert p.case_id in te
            assert p.s == model.support_case(by_id[p.case_id]).s


def test_abstaining_threshold_lowers_coverage(toy):
    res = run_cv(ExperimentConfig(folds=2, seed=0, eta=EtaConfig.abstaining(0.05, "net")), toy)
    assert res.coverage < 1.0
    assert all(f.matrix is None or f.matrix.total == sum(p.predicted != 0 for p in f.predictions)
               for f in res.folds)


def test_outputs_are_reproducible_apart_from_timings(toy, tmp_path):
    cfg = ExperimentConfig(folds=3, seed=9, tune=True, tune_folds=2)
    a, b = tmp_path / "a", tmp_path / "b"
    files = write_cv_outputs(run_cv(cfg, toy), a)
    write_cv_outputs(run_cv(cfg, toy), b)
    assert "tune.json" in files
    for name in files + ["manifest.json"]:
        if name != "timings.json":
            assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_parallel_folds_match_serial():
    ds = load_bundled("heart")
    serial = run_cv(ExperimentConfig(folds=3, seed=4), ds)
    parallel = run_cv(ExperimentConfig(folds=3, seed=4, threads=3), ds)
    assert [p.row() for p in serial.predictions] == [p.row() for p in parallel.predictions]


def test_prediction_csv_header(toy):
    res = run_cv(ExperimentConfig(folds=2, seed=0), toy)
    buf = io.StringIO()
    write_predictions_csv(res.predictions, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == PREDICTION_HEADER
    assert len(lines) == len(toy.cases) + 1


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(folds=1)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(format="xml")
    assert "threads" not in ExperimentConfig().as_dict()


def test_learning_curve_shape_and_determinism(toy):
    cfg = ExperimentConfig(seed=2)
    a = learning_curve(cfg, [0.3, 0.6], repetitions=3, dataset=toy)
    b = learning_curve(cfg, [0.3, 0.6], repetitions=3, dataset=toy)
    assert a == b
    assert [p.train_fraction for p in a] == [0.3, 0.6]
    assert all(0 <= p.test_accuracy <= 1 and 0 <= p.train_accuracy <= 1 for p in a)
    buf = io.StringIO()
    write_curve_csv(a, buf)
    assert len(buf.getvalue().splitlines()) == 3
    with pytest.raises(ConfigurationError):
        learning_curve(cfg, [0.6, 0.3], dataset=toy)
    with pytest.raises(ConfigurationError):
        learning_curve(cfg, [1.0], dataset=toy)
