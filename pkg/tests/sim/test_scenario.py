import json

import pytest

from core.config import BotConfig
from sim import SCENARIO_DIR
from sim.scenario import BotSpec, Intractable, Mode, Scenario, ScenarioError, WorkItem


def write(tmp_path, data, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def minimal(**overrides):
    data = {"bots": [{"name": "solo", "commands": ["hello"]}], "horizon": 3}
    data.update(overrides)
    return data


def test_bundled_scenarios_load():
    for path in sorted(SCENARIO_DIR.glob("*.json")):
        scenario = Scenario.load(path)
        assert scenario.name == path.stem
        assert scenario.bots


def test_defaults_fill_in_optional_fields(tmp_path):
    scenario = Scenario.load(write(tmp_path, minimal()))
    assert scenario.mode is Mode.RANDOM
    assert scenario.channel.has_memory is True
    assert scenario.seed == 0
    assert scenario.bots[0].online == [(0, None)]
    assert scenario.bots[0].config.reply_timeout is None


def test_missing_file_is_scenario_error(tmp_path):
    with pytest.raises(ScenarioError, match="does not exist"):
        Scenario.load(tmp_path / "nope.json")


def test_bad_json_is_scenario_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        Scenario.load(path)


def test_missing_horizon_is_scenario_error(tmp_path):
    data = minimal()
    del data["horizon"]
    with pytest.raises(ScenarioError):
        Scenario.load(write(tmp_path, data))


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"horizon": -1}, "horizon"),
        ({"workload": [{"tick": 9, "user": "a@b", "bot": "solo", "text": "hello"}]}, "outside"),
        ({"workload": [{"tick": 1, "user": "a@b", "bot": "ghost", "text": "hello"}]}, "unknown bot"),
        ({"expect": {"explosions": 1}}, "Unknown expectations"),
        ({"bots": [{"name": "twin"}, {"name": "twin"}]}, "Duplicate"),
        ({"bots": [{"name": "solo", "online": [[4, 2]]}]}, "invalid online interval"),
        ({"mode": "sometimes"}, "Invalid scenario"),
    ],
)
def test_invalid_scenarios_are_rejected(tmp_path, overrides, message):
    with pytest.raises(ScenarioError, match=message):
        Scenario.load(write(tmp_path, minimal(**overrides)))


def test_exhaustive_mode_is_bounded(tmp_path):
    bots = [{"name": f"bot{index}"} for index in range(4)]
    with pytest.raises(Intractable):
        Scenario.load(write(tmp_path, minimal(bots=bots, mode="exhaustive")))
    with pytest.raises(Intractable):
        Scenario.load(write(tmp_path, minimal(horizon=13, mode="exhaustive")))


def test_online_intervals_are_half_open():
    spec = BotSpec(config=BotConfig(name="flaky"), online=[(2, 4), (6, None)])
    assert [tick for tick in range(9) if spec.is_online(tick)] == [2, 3, 6, 7, 8]


def test_with_seed_keeps_everything_else():
    scenario = Scenario(bots=[BotSpec(config=BotConfig(name="solo"))], workload=[WorkItem(0, "a@b", "solo", "hello")])
    reseeded = scenario.with_seed(99)
    assert reseeded.seed == 99
    assert reseeded.workload == scenario.workload
    assert scenario.seed == 0
