from dataclasses import replace

import pytest

from core.config import BotConfig, DeviceConfig
from sim import SCENARIO_DIR
from sim.invariants import check_invariants
from sim.runner import ReplayScheduler, enumerate_small_schedules, run_scenario
from sim.scenario import BotSpec, Intractable, Mode, Scenario, ScenarioError, WorkItem


def bundled(name):
    return Scenario.load(SCENARIO_DIR / f"{name}.json")


def race(bots, text="co2 room23", horizon=3):
    return Scenario(
        bots=[
            BotSpec(config=BotConfig(name=name), devices=DeviceConfig(location="room23"), commands=["co2"])
            for name in bots
        ],
        workload=[WorkItem(1, "ana@home", None, text)],
        horizon=horizon,
        mode=Mode.EXHAUSTIVE,
    )


def test_two_bot_race_has_exactly_one_winner_per_schedule():
    scenario = bundled("race_two")
    traces = enumerate_small_schedules(scenario)
    assert len(traces) > 1
    winners = set()
    for trace in traces:
        claims = [event for event in trace.of_kind("ClaimSuccess") if event.get("cmd") == "co2"]
        assert len(claims) == 1
        assert trace.count("Execute") == 1
        assert trace.unclaimed == []
        assert check_invariants(trace, scenario).passed
        winners.add(claims[0]["bot"])
    assert winners == {"left", "right"}


def test_three_bot_race_lets_every_bot_win_somewhere():
    scenario = bundled("race_three")
    traces = enumerate_small_schedules(scenario)
    winners = {trace.first("Execute")["bot"] for trace in traces}
    assert winners == {"left", "middle", "right"}
    for trace in traces:
        assert trace.count("Execute") == 1
        assert check_invariants(trace, scenario).passed


def test_losers_record_a_failed_claim():
    traces = enumerate_small_schedules(bundled("race_two"))
    assert any(trace.count("ClaimFail") == 1 for trace in traces)


def test_nobody_capable_means_nobody_executes():
    scenario = race(["left", "right"], text="co2 room99")
    traces = enumerate_small_schedules(scenario)
    assert len(traces) == 1
    assert traces[0].count("Execute") == 0
    assert len(traces[0].unclaimed) == 1


def test_traces_are_distinct():
    traces = enumerate_small_schedules(bundled("race_two"))
    rendered = [trace.to_jsonl() for trace in traces]
    assert len(set(rendered)) == len(rendered)


def test_run_budget_is_enforced():
    with pytest.raises(Intractable):
        enumerate_small_schedules(bundled("race_three"), max_runs=2)


def test_bounds_are_enforced_before_running():
    scenario = race(["a", "b", "c", "d"])
    with pytest.raises(Intractable):
        enumerate_small_schedules(scenario)


def test_random_scenarios_are_not_enumerated():
    with pytest.raises(ScenarioError):
        enumerate_small_schedules(bundled("two_bot_co2"))


def test_replay_scheduler_walks_choices_like_an_odometer():
    scheduler = ReplayScheduler()
    assert scheduler.choose(2) == 0
    assert scheduler.choose(1) == 0
    assert scheduler.choose(3) == 0
    assert scheduler.next_prefix() == [0, 1]

    scheduler = ReplayScheduler([1, 2])
    scheduler.choose(2)
    scheduler.choose(3)
    assert scheduler.next_prefix() is None


@pytest.mark.parametrize("name", ["race_two", "race_three"])
def test_random_schedules_agree_with_enumeration(name):
    scenario = bundled(name)
    assert all(check_invariants(trace, scenario).passed for trace in enumerate_small_schedules(scenario))
    randomized = replace(scenario, mode=Mode.RANDOM)
    for seed in range(1000):
        trace = run_scenario(randomized, seed=seed)
        report = check_invariants(trace, randomized)
        assert report.passed, (seed, [failure.to_dict() for failure in report.failures()])
