import copy
import json
import os

import numpy as np
import pytest

from config.scenario import build_scenario
from config.settings import settings
from control import (
    compare_runs,
    horizon_splitting_ratio,
    read_log_csv,
    realized_cost,
    run_bot,
    run_known,
    run_scenario,
    run_tma,
    summarize_log,
    write_log_csv,
)
from control.log import log_columns
from dp.costs import signal_levels, stage_cost
from dynamics import CarrierState, feasible_actions
from tma import UkfState, nees
from utils.errors import ContractViolation, RunAborted

HERE = os.path.dirname(os.path.abspath(__file__))


def scenario_data(name):
    with open(os.path.join(HERE, "scenarios", name), "r", encoding="utf-8") as f:
        return json.load(f)


def scaled(data, M=8, NR=300, NS=2000, **overrides):
    data = copy.deepcopy(data)
    data["quantization"] = {**data["quantization"], "M": M, "NR": NR, "NS": NS}
    data.update(overrides)
    return data


def known_config(**overrides):
    return build_scenario(scaled(scenario_data("scenario1_known_single.json"), total_steps=8, **overrides))


def bot_config(name="scenario3_bot_single.json", **overrides):
    return build_scenario(scaled(scenario_data(name), **overrides))


def csv_bytes(log, path):
    write_log_csv(log, str(path))
    return path.read_bytes()


def assert_actions_feasible(config, log):
    space = config.action_space()
    for record in log.records:
        if record.action is not None:
            assert record.action in feasible_actions(space, record.carrier)


def test_constant_field_follows_tie_break():
    data = scaled(scenario_data("scenario1_known_single.json"), total_steps=8)
    data["targets"][0]["emitter"] = {
        "base_offset": 100.0, "spreading_coeff": 0.0, "absorption": 0.0, "modulation_amp": 0.0
    }
    config = build_scenario(data)
    log = run_known(config)
    space = config.action_space()
    assert len(log) == 9
    assert log.records[0].action == (0.0, 0.0, -50.0)
    for record in log.records[:-1]:
        assert record.action == feasible_actions(space, record.carrier)[0]
        assert record.stage_cost == 100.0
    assert log.records[-1].action is None
    assert log.records[-1].carrier.depth == 50.0


def test_known_target_control_beats_zero_action():
    config = build_scenario(scenario_data("scenario1_known_single.json"))
    controlled = run_known(config)
    baseline = run_known(config, baseline=True)
    mean_controlled = np.mean([r.stage_cost for r in controlled.records])
    mean_baseline = np.mean([r.stage_cost for r in baseline.records])
    assert mean_controlled <= mean_baseline - 5.0
    assert all(r.action == (0.0, 0.0, 0.0) for r in baseline.records[:-1])
    assert all(r.grid_id is None for r in baseline.records)
    assert_actions_feasible(config, controlled)


def test_known_double_runs_on_the_joint_chain():
    data = scaled(scenario_data("scenario2_known_double.json"), total_steps=4)
    config = build_scenario(data)
    log = run_known(config)
    assert log.n_targets == 2
    assert all(len(r.target_positions) == 2 for r in log.records)
    assert all(r.truth.shape == (8,) for r in log.records)
    assert_actions_feasible(config, log)
    assert log.records[0].nearest_index is not None


def test_horizon_splitting_is_never_better_than_one_solve():
    data = scaled(scenario_data("scenario1_known_single.json"), M=1, NR=50, NS=100, total_steps=8, subinterval_length=2)
    data["targets"][0]["sigma_eps"] = 0.0
    data["targets"][0]["Sigma0"] = [[0.0] * 4 for _ in range(4)]
    config = build_scenario(data)
    result = horizon_splitting_ratio(config)
    assert result.split_total >= result.unsplit_total - 1e-9
    assert result.ratio >= 1.0 - 1e-12

    split = run_known(config)
    assert [r.grid_id for r in split.records[:-1]] == [t // 2 for t in range(8)]
    assert realized_cost(split, "zero") == pytest.approx(sum(r.stage_cost for r in split.records[1:]))


def test_full_tma_period_matches_filter_only_run(tmp_path):
    config = bot_config(total_steps=12, period1_end=6, maneuver_schedule=[
        {"start": 2, "duration": 2, "displacement": [300.0, -300.0, 0.0]}
    ])
    tma = run_tma(config)
    all_filtering = run_bot(config.model_copy(update={"period1_end": 12}))
    assert csv_bytes(tma, tmp_path / "a.csv") == csv_bytes(all_filtering, tmp_path / "b.csv")
    assert all(r.grid_id is None and r.nearest_index is None for r in tma.records)
    assert [r.action for r in tma.records[:-1]] == [config.scheduled_displacement(t) for t in range(12)]

    straight = run_tma(config, maneuvers=False)
    assert all(r.action == (300.0, 0.0, 0.0) for r in straight.records[:-1])


def test_single_cycle_when_subinterval_covers_period_two():
    config = bot_config(total_steps=14, period1_end=8, subinterval_length=6, maneuver_schedule=[])
    log = run_bot(config)
    assert [r.grid_id for r in log.period(1)[:-1]] == [None] * 8
    assert {r.grid_id for r in log.records if r.t >= 8} == {0}
    assert_actions_feasible(config, log)


def test_grid_refreshes_at_subinterval_boundaries():
    config = bot_config(total_steps=14, period1_end=8, subinterval_length=2, maneuver_schedule=[])
    log = run_bot(config)
    period_two = [r for r in log.records if 8 <= r.t < 14]
    assert [r.grid_id for r in period_two] == [(r.t - 8) // 2 for r in period_two]
    for r in period_two:
        assert r.nearest_index is not None and 0 <= r.nearest_index < 8
    for record in log.records:
        assert record.cov_trace is not None and record.cov_trace > 0
        assert record.measurement is not None and record.measurement.t == record.t


def test_runs_are_deterministic_and_independent_of_workers(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "TRANSITION_SHARD_SIZE", 500)
    config = bot_config(total_steps=12, period1_end=6, subinterval_length=3, maneuver_schedule=[])
    first = csv_bytes(run_scenario(config, workers=1), tmp_path / "first.csv")
    second = csv_bytes(run_scenario(config, workers=4), tmp_path / "second.csv")
    assert first == second

    known = known_config()
    assert csv_bytes(run_scenario(known, workers=1), tmp_path / "k1.csv") == csv_bytes(
        run_scenario(known, workers=3), tmp_path / "k2.csv"
    )


def test_maneuvers_improve_observability():
    config = bot_config(total_steps=22, truth_from_prior=True)
    sq_with, sq_without, nees_values = [], [], []
    for seed in range(50):
        seeded = config.model_copy(update={"seed": 1000 + seed})
        maneuvered = run_tma(seeded).records[-1]
        straight = run_tma(seeded, maneuvers=False).records[-1]
        for record, sink in ((maneuvered, sq_with), (straight, sq_without)):
            truth_xy = np.array(record.target_positions[0])
            sink.append(np.sum((record.estimate[[0, 2]] - truth_xy) ** 2))
        nees_values.append(nees(UkfState(mean=maneuvered.estimate, cov=maneuvered.covariance), maneuvered.truth))
    assert np.sqrt(np.mean(sq_with)) < np.sqrt(np.mean(sq_without))
    assert 1.0 <= np.mean(nees_values) <= 10.0


def test_filter_failure_aborts_with_partial_log():
    config = bot_config(total_steps=3, period1_end=3, maneuver_schedule=[])
    target = config.targets[0].model_copy(update={"sigma_eps": 0.0, "initial_state": (300.0, 0.0, 0.0, 0.0)})
    config = config.model_copy(update={"targets": [target]})
    with pytest.raises(RunAborted) as caught:
        run_bot(config)
    log = caught.value.log
    assert log.aborted
    assert [r.t for r in log.records] == [0, 1]
    assert log.records[-1].status == "diverged"


def test_tradeoff_cost_bottoms_out_where_target_stops_hearing_carrier():
    config = build_scenario(scenario_data("scenario4_bot_tradeoff.json"))
    cost = config.cost_model()
    depth = config.targets[0].depth
    radii = np.arange(200.0, 30001.0, 100.0)
    costs = np.array([stage_cost(cost, CarrierState(r, 0.0, 50.0), [((0.0, 0.0), depth)]) for r in radii])
    best = int(np.argmin(costs))
    assert 1500.0 <= radii[best] <= 2500.0
    _, c_s = signal_levels(cost, CarrierState(radii[best], 0.0, 50.0), (0.0, 0.0), depth)
    assert c_s == 200.0
    # farther out only costs more, so the carrier has no reason to run away
    assert np.all(np.diff(costs[best:]) > 0)
    assert np.all(np.diff(costs[:best + 1]) < 0)


def test_tradeoff_cost_keeps_carrier_quieter():
    c_s_single, c_s_tradeoff, c_w_single, c_w_tradeoff = [], [], [], []
    single = build_scenario(scenario_data("scenario3_bot_single.json"))
    tradeoff = build_scenario(scenario_data("scenario4_bot_tradeoff.json"))
    for seed in range(10):
        a = run_bot(single.model_copy(update={"seed": 500 + seed}))
        b = run_bot(tradeoff.model_copy(update={"seed": 500 + seed}))
        # no optimization before period1_end, so the cost model cannot move the carrier
        assert [r.carrier for r in a.period(1)] == [r.carrier for r in b.period(1)]
        comparison = compare_runs(b, a)
        c_s_tradeoff.append(comparison.period2_a.c_s)
        c_s_single.append(comparison.period2_b.c_s)
        c_w_tradeoff.append(comparison.period2_a.c_w)
        c_w_single.append(comparison.period2_b.c_w)
    assert np.mean(c_s_tradeoff) > np.mean(c_s_single)
    assert np.mean(c_w_tradeoff) <= np.mean(c_w_single) + 15.0


def test_controlled_bearings_only_run_hears_target_better():
    config = bot_config(M=15, NR=1000, NS=5000)
    controlled = run_bot(config)
    baseline = run_bot(config, baseline=True)
    comparison = compare_runs(controlled, baseline)
    assert comparison.differences["period2"]["c_w"] < 0
    assert comparison.differences["period1"]["c_w"] == 0.0
    assert all(r.action == (0.0, 0.0, 0.0) for r in baseline.records if 22 <= r.t < 45)


def test_compare_identical_and_mismatched_logs():
    log = run_bot(bot_config(total_steps=10, period1_end=10, maneuver_schedule=[]))
    comparison = compare_runs(log, log)
    for period in comparison.differences.values():
        assert all(v in (0.0, None) for v in period.values())
    assert comparison.to_dict()["difference"] == comparison.differences

    shorter = run_bot(bot_config(total_steps=8, period1_end=8, maneuver_schedule=[]))
    with pytest.raises(ContractViolation):
        compare_runs(log, shorter)

    summary = summarize_log(log)
    assert summary["period2"]["steps"] == 0
    assert summary["period1"]["steps"] == 11
    assert summary["period1"]["position_rmse"] > 0


def test_log_csv_round_trip(tmp_path):
    config = bot_config(total_steps=12, period1_end=6, subinterval_length=3, maneuver_schedule=[])
    log = run_bot(config)
    path = tmp_path / "log.csv"
    write_log_csv(log, str(path))
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == log_columns(1)
    assert len(lines) == 14

    reread = read_log_csv(str(path), period1_end=6, scenario_kind="bot_single")
    assert len(reread) == len(log)
    assert reread.records[-1].action is None
    assert [r.grid_id for r in reread.records] == [r.grid_id for r in log.records]
    again = tmp_path / "again.csv"
    write_log_csv(reread, str(again))
    assert again.read_bytes() == path.read_bytes()
    for period in compare_runs(log, reread).differences.values():
        for name, value in period.items():
            if value is not None:
                assert abs(value) < 0.1, name
