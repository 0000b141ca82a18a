import math
from pathlib import Path

import numpy as np
import pytest

import wattscope as ws

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_reference_curve_endpoints():
    curve = ws.reference_curve()
    assert curve.evaluate(0.0) == pytest.approx(105.0)
    assert curve.evaluate(1.0) == pytest.approx(175.0)
    assert ws.power_of(curve, 0.5) == pytest.approx(133.75)


def test_domain_errors_carry_the_qualified_name():
    with pytest.raises(ws.Error) as info:
        ws.power_of(ws.reference_curve(), 1.5)
    assert info.value.name == "powermodel.OutOfRange"
    with pytest.raises(ws.Error) as info:
        ws.nmae([1.0, 2.0], [1.0])
    assert info.value.name == "eval.LengthMismatch"


def test_synthetic_job_hits_targets():
    s = ws.synthetic_job(2016, target_cov=0.3, mean_power_w=60.0, period_samples=288, period_score=0.8, noise_seed=4)
    assert isinstance(s, np.ndarray)
    assert s.shape == (2016,)
    assert s.mean() == pytest.approx(60.0, rel=1e-6)
    assert abs(ws.cov(s) - 0.3) <= 0.05
    periods = ws.detect_periods(s)
    assert periods and abs(periods[0][0] - 288) <= 2


def test_profile_classes():
    p = ws.profile(np.full(600, 50.0))
    assert p["cov"] == 0.0
    assert p["periods"] == []
    assert p["variability"] == "Low"
    assert p["regularity"] == "Low"
    assert p["intensity"] == "Medium"


def test_metric_identity():
    rng = np.random.default_rng(1)
    truth = rng.uniform(10, 100, 500)
    pred = rng.uniform(10, 100, 500)
    assert ws.nmae(pred, truth) * truth.mean() == pytest.approx(ws.mae(pred, truth), rel=1e-9)


def test_mean_baseline_conserves_with_reconcile():
    agg, jobs = ws.load_server_trace(FIXTURES / "five_jobs")
    assert len(jobs) == 5
    model = ws.mean_fit({k: v[:576] for k, v in jobs.items()})
    assert model.type == "mean"
    out = ws.disaggregate(agg, [(k, model) for k in sorted(jobs)], reconcile=True)
    total = sum(out.values())
    assert np.max(np.abs(total - agg) / agg) <= 1e-9


def test_network_train_predict_and_round_trip(tmp_path):
    t = np.arange(1200)
    target = 60 + 30 * np.sin(2 * math.pi * t / 48)
    other = 40 + 20 * np.sign(np.sin(2 * math.pi * t / 100))
    agg = ws.aggregate({"a": target, "b": other})
    model = ws.train_network(agg, target, preset="desk", epochs=2, window=12, seed=3)
    assert model.type == "sliding_window"
    pred = model.predict_series(agg)
    assert pred.shape == agg.shape
    assert np.all((pred >= 0) & (pred <= 200))
    model.save(tmp_path / "m")
    again = ws.load_model(tmp_path / "m")
    np.testing.assert_array_equal(again.predict_series(agg), pred)
    out = ws.disaggregate(agg, [("a", model)])
    np.testing.assert_allclose(out["a"], pred, atol=0.2)


def test_monitor_fires_on_persistent_breach():
    m = ws.Monitor(threshold=0.1, persistence=3)
    events = [m.observe(100.0, [70.0]) for _ in range(3)]
    assert events == ["degraded", "degraded", "reselect"]
    assert m.observe_error(0.0) == "ok"


def test_small_experiment_is_deterministic():
    cfg = {
        "scenario": "table1_style",
        "seed": 7,
        "train_samples": 600,
        "test_samples": 200,
        "network": {"window": 8, "epochs": 1, "conv_filters": 4, "gru1_units": 4, "gru2_units": 4, "dense1_units": 8},
    }
    assert "table1_style" in ws.scenario_names()
    a = ws.run_experiment(cfg)
    b = ws.run_experiment(cfg)
    assert a == b
    assert a["scenario"] == "table1_style"
