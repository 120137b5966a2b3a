import json
import os

import numpy as np
import pytest

from config.scenario import build_scenario, load_scenario
from config.settings import settings
from dynamics import JointTargetModel
from utils.errors import ConfigurationError
from utils.seeding import derive_seed

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIOS = sorted(os.listdir(os.path.join(HERE, "scenarios")))


def scenario_data(name):
    with open(os.path.join(HERE, "scenarios", name), "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenarios_load(name):
    config = load_scenario(os.path.join(HERE, "scenarios", name))
    assert config.seed == 20160705
    cost = config.cost_model()
    assert cost.n_targets == len(config.targets)
    assert config.action_space().contains(config.carrier_state())


def test_joint_model_for_two_targets():
    config = build_scenario(scenario_data("scenario2_known_double.json"))
    joint = config.joint_model()
    assert isinstance(joint, JointTargetModel)
    assert joint.mu0.shape == (8,)
    np.testing.assert_array_equal(config.quantization.metric_weights(8)[[1, 5]], [3600.0, 3600.0])
    assert [f.source_depth for f in config.target_fields()] == [500.0, 200.0]


def test_unknown_keys_are_rejected():
    data = scenario_data("scenario1_known_single.json")
    data["carrier"]["turbo"] = True
    with pytest.raises(ConfigurationError):
        build_scenario(data)


def test_seed_override_and_default(monkeypatch):
    data = scenario_data("scenario1_known_single.json")
    assert build_scenario(data, seed=42).seed == 42
    del data["seed"]
    monkeypatch.setattr(settings, "DEFAULT_SEED", 99)
    assert build_scenario(data).seed == 99


def test_config_hash_tracks_content():
    data = scenario_data("scenario3_bot_single.json")
    first = build_scenario(data).config_hash()
    assert build_scenario(json.loads(json.dumps(data))).config_hash() == first
    assert build_scenario(data, seed=1).config_hash() != first
    assert len(first) == 64


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(period1_end=60),
        lambda d: d.update(period1_end=10),
        lambda d: d.update(scenario_kind="known_double"),
        lambda d: d["cost"].update(mode="tradeoff"),
        lambda d: d["targets"][0].update(Sigma0=[[1.0, 0.0], [0.0, 1.0]]),
        lambda d: d["targets"][0].update(Sigma0=np.diag([-1.0, 1.0, 1.0, 1.0]).tolist()),
        lambda d: d["carrier"]["actions"].update(depth_bounds=[900.0, 100.0]),
        lambda d: d["quantization"].update(M=0),
    ],
)
def test_inconsistent_known_scenarios(mutate):
    data = scenario_data("scenario1_known_single.json")
    mutate(data)
    with pytest.raises(ConfigurationError):
        build_scenario(data)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(maneuver_schedule=[{"start": 21, "duration": 2, "displacement": [300.0, 0.0, 0.0]}]),
        lambda d: d["carrier"].update(cruise=[100.0, 0.0, 0.0]),
        lambda d: d["filter"].update(alpha_sp=0.5, kappa_sp=-4.0),
        lambda d: d["filter"].update(init_mode="oracle"),
    ],
)
def test_inconsistent_bearings_only_scenarios(mutate):
    data = scenario_data("scenario3_bot_single.json")
    mutate(data)
    with pytest.raises(ConfigurationError):
        build_scenario(data)


def test_tradeoff_needs_carrier_emitter():
    data = scenario_data("scenario4_bot_tradeoff.json")
    del data["carrier"]["emitter"]
    with pytest.raises(ConfigurationError):
        build_scenario(data)


def test_scheduled_displacement():
    config = build_scenario(scenario_data("scenario3_bot_single.json"))
    assert config.scheduled_displacement(0) == (300.0, 0.0, 0.0)
    assert config.scheduled_displacement(10) == (300.0, -300.0, 0.0)
    assert config.scheduled_displacement(11) == (300.0, -300.0, 0.0)
    assert config.scheduled_displacement(12) == (300.0, 0.0, 0.0)
    assert config.scheduled_displacement(21) == (300.0, 300.0, 0.0)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_scenario(str(tmp_path / "nope.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    with pytest.raises(ConfigurationError):
        load_scenario(str(broken))
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ConfigurationError):
        load_scenario(str(listing))


def test_derived_seeds_are_stable_and_separate_streams():
    assert derive_seed(20160705, 3, 1) == derive_seed(20160705, 3, 1)
    assert derive_seed(20160705, 3, 1) != derive_seed(20160705, 3, 2)
    assert derive_seed(20160705, 3) != derive_seed(20160706, 3)
    assert 0 <= derive_seed(1) < 2**64
