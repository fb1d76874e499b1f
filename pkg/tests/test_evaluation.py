import datetime as dt

import numpy as np
import pytest

import oracles
from conftest import StubModel, day
from rnncast.core import ModelConfig, RecurrentModel, init_params
from rnncast.data import (DegenerateScalerError, ScalerParams, SplitSpec, TimeSeries,
                          fit_scaler)
from rnncast.evaluation import (ComparisonTable, EvaluationReport, RegionFailure,
                                approach_table, compare_architectures, evaluate_one_step, mae,
                                native_split, run_approach1, run_approach2)

SPLIT = SplitSpec(day("2020-12-27"))
FAST = ModelConfig("LSTM", (8,), 8, epochs=3)


def series(values, start="2020-06-10", name="R"):
    d0 = day(start)
    return TimeSeries(name, [d0 + dt.timedelta(days=k) for k in range(len(values))], values)


def test_mae_examples():
    assert mae([1, 2], [1, 2]) == 0.0
    assert mae([2, 4], [1, 2]) == 1.5
    with pytest.raises(ValueError):
        mae([], [])


def test_mae_matches_loop():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p, a = rng.normal(0, 1e4, 23), rng.normal(0, 1e4, 23)
        assert abs(mae(p, a) - oracles.mae_loop(p.tolist(), a.tolist())) <= 1e-12 * max(
            1.0, oracles.mae_loop(p.tolist(), a.tolist()))


def test_last_value_stub_scores_first_differences(stub_last):
    rng = np.random.default_rng(0)
    s = series(np.cumsum(rng.integers(-50, 80, 40)).astype(float) + 1000)
    start = s.dates[20]
    rep = evaluate_one_step(stub_last(5), fit_scaler(s), s, start)
    x = s.values
    want = np.mean(np.abs(x[20:] - x[19:-1]))
    assert rep.mae == pytest.approx(want, rel=1e-12)
    assert rep.dates == list(s.dates[20:])


def test_constant_test_period_scores_zero(stub_last):
    s = series([1.0, 2.0, 3.0] + [9.0] * 10)
    rep = evaluate_one_step(stub_last(3), ScalerParams(0.0, 10.0), s, s.dates[6])
    assert rep.mae == pytest.approx(0.0, abs=1e-12)


def test_report_mae_recomputes(maharashtra):
    cfg = ModelConfig("LSTM", (4,), 8)
    model = RecurrentModel(cfg, init_params(cfg))
    rep = evaluate_one_step(model, fit_scaler(maharashtra), maharashtra, day("2020-12-28"))
    assert abs(rep.mae - oracles.mae_loop(rep.predictions.tolist(), rep.actuals.tolist())) <= 1e-9
    assert len(rep.predictions) == len(rep.actuals) == len(rep.dates) == 220
    back = EvaluationReport.from_dict(rep.to_dict())
    assert back.mae == rep.mae and back.dates == rep.dates


def test_insufficient_history(stub_last):
    s = series(np.arange(10.0))
    with pytest.raises(Exception, match="window needs 8"):
        evaluate_one_step(stub_last(8), ScalerParams(0, 9), s, s.dates[3])


def test_approach1_source_self_consistency(regions):
    cfg = ModelConfig("LSTM", (4,), 8, seed=1)
    model = RecurrentModel(cfg, init_params(cfg), training_region="Maharashtra")
    reports = run_approach1(model, [regions["Maharashtra"], regions["Kerala"]], SPLIT)
    m = regions["Maharashtra"]
    direct = evaluate_one_step(model, fit_scaler(m), m, day("2020-12-28"))
    assert reports[0].mae == direct.mae
    assert reports[0].predictions.tolist() == direct.predictions.tolist()
    assert [r.region_name for r in reports] == ["Maharashtra", "Kerala"]
    assert all(r.approach == "transfer" for r in reports)


def test_approach1_short_region_isolated(regions):
    cfg = ModelConfig("LSTM", (4,), 8)
    model = RecurrentModel(cfg, init_params(cfg))
    short = series([1.0, 2.0, 3.0, 4.0, 5.0], start="2020-12-26", name="Tiny")
    reports = run_approach1(model, [short, regions["Delhi"]], SPLIT)
    assert isinstance(reports[0], RegionFailure) and reports[0].region_name == "Tiny"
    assert isinstance(reports[1], EvaluationReport)


def test_approach1_leaves_weights_untouched(regions):
    cfg = ModelConfig("GRU", (4,), 8, seed=3)
    model = RecurrentModel(cfg, init_params(cfg))
    before = model.dumps()
    run_approach1(model, list(regions.values()), SPLIT, jobs=2)
    assert model.dumps() == before


def test_approach1_parallel_matches_serial(regions):
    cfg = ModelConfig("LSTM", (4,), 8, seed=3)
    model = RecurrentModel(cfg, init_params(cfg))
    rs = list(regions.values())[:5]
    a = run_approach1(model, rs, SPLIT)
    b = run_approach1(model, rs, SPLIT, jobs=3)
    assert [r.mae for r in a] == [r.mae for r in b]


def test_approach2_deterministic(regions):
    a = run_approach2(regions["Kerala"], FAST, SPLIT)
    b = run_approach2(regions["Kerala"], FAST, SPLIT)
    assert a.mae == b.mae and a.approach == "native"
    assert a.scaler_used == fit_scaler(regions["Kerala"].between(day("2020-06-10"),
                                                                 day("2020-12-27")))


def test_approach2_degenerate_training_split(regions):
    with pytest.raises(DegenerateScalerError, match="Lakshadweep"):
        run_approach2(regions["Lakshadweep"], FAST, SPLIT)


def test_approach2_late_start_uses_300_days(regions):
    lak = regions["Lakshadweep"]
    train, test = native_split(lak, SPLIT, late_start_train_days=300)
    assert len(train) == 300 and train.start == day("2020-06-10")
    assert test.start == day("2020-06-10") + dt.timedelta(days=300)
    rep = run_approach2(lak, FAST, SPLIT, late_start_train_days=300)
    assert rep.dates[0] == test.start and np.isfinite(rep.mae)


def test_late_start_ignored_for_early_regions(regions):
    k = regions["Kerala"]
    assert native_split(k, SPLIT, 300)[0].end == day("2020-12-27")


def test_compare_empty_presets(maharashtra):
    assert compare_architectures(maharashtra, SPLIT, presets=[]).rows == []


def test_compare_small_sweep(maharashtra, tmp_path):
    presets = [("LSTM", (4,), 8), ("GRU", (3,), 6), ("StackedRNN", (3, 2), 5)]
    base = ModelConfig(epochs=2)
    table = compare_architectures(maharashtra, SPLIT, presets, base=base, base_seed=10)
    assert len(table.rows) == 3
    maes = [r.mae for r in table.rows]
    assert all(np.isfinite(maes)) and maes == sorted(maes)
    assert {r.seed for r in table.rows} == {10, 11, 12}
    table.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("sr_no,model,hidden_units,layers,input_window,output_window,mae")
    assert len(lines) == 4


def test_compare_records_failed_preset(maharashtra):
    table = compare_architectures(maharashtra, SPLIT, [("LSTM", (4, 4), 8), ("LSTM", (4,), 8)],
                                  base=ModelConfig(epochs=1))
    assert table.rows[0].mae is not None and table.rows[-1].mae is None
    assert "StructureError" in table.rows[-1].error


def test_approach_table_shape(regions):
    cfg = ModelConfig("LSTM", (4,), 8)
    model = RecurrentModel(cfg, init_params(cfg))
    rs = [regions["Kerala"], regions["Delhi"]]
    rows = approach_table(run_approach1(model, rs, SPLIT),
                          [RegionFailure("Kerala", "x"), run_approach2(regions["Delhi"], FAST,
                                                                       SPLIT)])
    assert [r[0] for r in rows] == ["Kerala", "Delhi"]
    assert rows[0][2] is None and rows[1][2] is not None


def test_comparison_table_to_dict():
    t = ComparisonTable()
    assert t.to_dict() == {"rows": []}


def test_stub_model_interface():
    m = StubModel(3, lambda row: row.mean())
    assert m.predict(np.array([[1.0, 2.0, 3.0]])).tolist() == [2.0]
