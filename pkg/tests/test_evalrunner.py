import random

import pytest

from rareval.backend import MockBackend
from rareval.evalrunner import (ColdStartStrata, ExperimentConfig, MetricError,
                                PredictorSpec, ScenarioSpec, cold_start_strata,
                                load_config, mae, mse, run_experiment,
                                view_global_mean, view_user_means, write_report)
from rareval.perturb import PerturbSpec
from rareval.splitter import SplitSpec, split
from rareval.views import DatasetView
from tests.conftest import make_dataset


def test_mae_examples():
    assert mae([4, 3], [4, 3]) == 0.0
    assert mae([4, 3], [5, 1]) == 1.5
    assert mae([2], [5]) == 3.0


def test_mse_examples():
    assert mse([4, 3], [4, 3]) == 0.0
    assert mse([4, 3], [5, 1]) == 2.5
    assert mse([1], [5]) == 16.0


def test_metric_errors():
    with pytest.raises(MetricError):
        mae([], [])
    with pytest.raises(MetricError):
        mae([1, 2], [1])
    with pytest.raises(MetricError):
        mse([1], [1, 2])


def test_metric_reference_agreement():
    rng = random.Random(0)
    for _ in range(50):
        n = rng.randint(1, 500)
        p = [rng.uniform(1, 5) for _ in range(n)]
        t = [rng.uniform(1, 5) for _ in range(n)]
        naive_mae = sum(abs(a - b) for a, b in zip(p, t)) / n
        naive_mse = sum((a - b) ** 2 for a, b in zip(p, t)) / n
        assert abs(mae(p, t) - naive_mae) < 1e-12
        assert abs(mse(p, t) - naive_mse) < 1e-12


def test_cold_start_strata():
    ds = make_dataset(200, 25, 15, seed=5)
    folds = split(ds, SplitSpec(seed=2))
    strata = cold_start_strata(folds.train, folds.test)
    total = sum(len(b) for b in strata.buckets.values()) + len(strata.excluded)
    assert total == len(folds.test)
    for f, bucket in strata.buckets.items():
        for p in bucket:
            user = ds.reviews[p].user
            assert len(folds.train.user_positions(user)) == f


def test_cold_start_hand_fixture():
    ds = make_dataset(40, 8, 8, seed=11)
    train = DatasetView(ds, [0, 1, 2])        # user of review 0 appears here
    test = DatasetView(ds, [10])
    user = ds.reviews[10].user
    f = sum(1 for p in (0, 1, 2) if ds.reviews[p].user == user)
    strata = cold_start_strata(train, test)
    assert 10 in strata.buckets[f]


def base_config(tmp_path, ds_path="unused", scenarios=None, predictor=None, **kw):
    return ExperimentConfig(
        dataset_path=ds_path,
        dataset_format="generic-csv",
        scenarios=scenarios or [ScenarioSpec("base")],
        predictor=predictor or PredictorSpec(kind="baseline", baseline="global-mean"),
        output_dir=str(tmp_path / "out"),
        **kw,
    )


def test_run_baseline_and_report_files(tmp_path):
    ds = make_dataset(300, 20, 15, seed=1)
    cfg = base_config(tmp_path)
    report = run_experiment(cfg, dataset=ds)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.status == "ok"
    assert row.n_eval == len(split(ds, cfg.split).test)
    out = tmp_path / "out"
    assert (out / "report.csv").exists() and (out / "cold_start.csv").exists()
    assert (out / "summary.txt").exists() and (out / "timings.csv").exists()


def test_rq2_grid_has_five_rows(tmp_path):
    ds = make_dataset(300, 20, 15, seed=1)
    scenarios = [ScenarioSpec(f"rq2_{f}", perturb=PerturbSpec("remove", f, seed=3))
                 for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
    cfg = base_config(tmp_path, scenarios=scenarios)
    report = run_experiment(cfg, dataset=ds)
    assert len(report.rows) == 5
    assert all(r.status == "ok" for r in report.rows)
    # text-blind predictor: metrics identical across all fractions
    assert len({r.mae for r in report.rows}) == 1
    assert len({r.mse for r in report.rows}) == 1


def test_text_blind_across_distortion(tmp_path):
    ds = make_dataset(300, 20, 15, seed=1)
    scenarios = [ScenarioSpec(f"rq3_{f}", perturb=PerturbSpec("distort", f, seed=3))
                 for f in (0.0, 0.5, 1.0)]
    pred = PredictorSpec(kind="prompt", family="revlora", rating_only=True,
                         mock_mode="fixed", mock_fixed="3.5")
    cfg = base_config(tmp_path, scenarios=scenarios, predictor=pred)
    report = run_experiment(cfg, dataset=ds)
    assert len({r.mae for r in report.rows}) == 1


def test_echo_user_mean_closure(tmp_path):
    ds = make_dataset(400, 30, 20, seed=3)
    pred = PredictorSpec(kind="prompt", family="zero-shot", mock_mode="echo-user-mean")
    cfg = base_config(tmp_path, predictor=pred)
    report = run_experiment(cfg, dataset=ds)
    folds = split(ds, cfg.split)
    means = view_user_means(folds.train)
    g = view_global_mean(folds.train)
    truth = [ds.reviews[p].rating for p in folds.test.positions]
    oracle = [means.get(ds.reviews[p].user, g) for p in folds.test.positions]
    assert report.rows[0].mae == mae(oracle, truth)
    assert report.rows[0].mse == mse(oracle, truth)


def test_failure_imputation(tmp_path):
    ds = make_dataset(200, 15, 10, seed=4)
    pred = PredictorSpec(kind="prompt", family="zero-shot",
                         mock_mode="fixed", mock_fixed="no idea")
    cfg = base_config(tmp_path, predictor=pred)
    report = run_experiment(cfg, dataset=ds)
    row = report.rows[0]
    assert row.parse_failure_rate == 1.0
    folds = split(ds, cfg.split)
    g = view_global_mean(folds.train)
    truth = [ds.reviews[p].rating for p in folds.test.positions]
    assert row.mae == mae([g] * len(truth), truth)
    assert row.n_eval == len(truth)  # failures imputed, never dropped


def test_scenario_error_isolation(tmp_path):
    ds = make_dataset(100, 10, 10, seed=5)
    scenarios = [ScenarioSpec("bad", core_k=50), ScenarioSpec("good")]
    cfg = base_config(tmp_path, scenarios=scenarios)
    report = run_experiment(cfg, dataset=ds)
    assert [r.status for r in report.rows] == ["error", "ok"]


def test_report_determinism(tmp_path):
    ds = make_dataset(250, 18, 12, seed=6)
    pred = PredictorSpec(kind="prompt", family="few-shot", mock_mode="fixed", mock_fixed="4")
    outs = []
    for run_id in ("a", "b"):
        cfg = ExperimentConfig(
            dataset_path="unused", dataset_format="generic-csv",
            scenarios=[ScenarioSpec("base"),
                       ScenarioSpec("rm50", perturb=PerturbSpec("remove", 0.5, seed=2))],
            predictor=pred, output_dir=str(tmp_path / run_id), seed=77,
        )
        run_experiment(cfg, dataset=ds)
        outs.append((tmp_path / run_id / "report.csv").read_bytes())
    assert outs[0] == outs[1]


def test_config_yaml_round_trip(tmp_path):
    cfg_text = """
version: 1
dataset: {path: data.csv, format: generic-csv}
core_k: 3
seed: 9
split: {seed: 21, ratios: [0.8, 0.1, 0.1]}
output_dir: out
predictor:
  kind: prompt
  family: few-shot
  backend: {kind: mock, mock_mode: fixed, fixed: "4", max_in_flight: 2}
budget: {max_review_tokens: 512, shots: 2}
scenarios:
  - {id: base}
  - {id: rm25, perturb: {kind: remove, fraction: 0.25, seed: 5}}
  - {id: k5, core_k: 5}
  - {id: noreview, rating_only: true}
"""
    path = tmp_path / "exp.yaml"
    path.write_text(cfg_text)
    cfg = load_config(path)
    assert cfg.core_k == 3 and cfg.split.seed == 21
    assert cfg.predictor.family == "few-shot" and cfg.predictor.backend.max_in_flight == 2
    assert cfg.budget.max_review_tokens == 512 and cfg.budget.shots == 2
    assert [s.id for s in cfg.scenarios] == ["base", "rm25", "k5", "noreview"]
    assert cfg.scenarios[1].perturb.fraction == 0.25
    assert cfg.scenarios[2].core_k == 5
    assert cfg.scenarios[3].rating_only
    assert cfg.digest() == load_config(path).digest()


def test_concurrent_dispatch_bounded(tmp_path):
    ds = make_dataset(150, 12, 10, seed=7)
    from rareval.backend import BackendConfig

    pred = PredictorSpec(kind="prompt", family="zero-shot",
                         backend=BackendConfig(kind="mock", max_in_flight=3))
    cfg = base_config(tmp_path, predictor=pred)
    backend = MockBackend(fixed="4")
    run_experiment(cfg, dataset=ds, backend=backend)
    assert backend.max_in_flight_seen <= 3
