"""Protocol properties evaluated over a recorded trace."""

from __future__ import annotations

from collections import Counter, OrderedDict, defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from core.botcore import CLAIM_SUCCESS, DELIVER, EXECUTE, POST, READ, TIMEOUT, WITHDRAW
from core.commands import BROADCAST_PREFIX, CommandRegistry
from core.plugins import PluginManager, build_registry
from sim.scenario import Scenario
from sim.trace import EventTrace

Event = Dict[str, Any]


@dataclass(slots=True)
class InvariantResult:
    name: str
    passed: bool
    offending: List[int] = field(default_factory=list)
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "offending": self.offending, "detail": self.detail}


@dataclass(slots=True)
class InvariantReport:
    results: List[InvariantResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def get(self, name: str) -> InvariantResult:
        for result in self.results:
            if result.name == name:
                return result
        raise KeyError(name)

    def failures(self) -> List[InvariantResult]:
        return [result for result in self.results if not result.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "results": [result.to_dict() for result in self.results]}


def _result(name: str, offending: List[int], detail: str = "") -> InvariantResult:
    return InvariantResult(name=name, passed=not offending, offending=sorted(set(offending)), detail=detail)


def _is_broadcast(event: Event) -> bool:
    return str(event.get("cmd", "")).startswith(BROADCAST_PREFIX)


def _command_posts(events: List[Event]) -> Dict[int, Event]:
    return {
        event["message_id"]: event for event in events if event["kind"] == POST and event.get("typ") == "Cmd"
    }


def check_at_most_once(events: List[Event]) -> InvariantResult:
    offending: List[int] = []
    seen: Counter = Counter()
    for index, event in enumerate(events):
        if event["kind"] != EXECUTE or "message_id" not in event:
            continue
        # broadcasts run once per bot, single-target commands once overall
        key = (event["message_id"], event["bot"]) if _is_broadcast(event) else (event["message_id"], None)
        seen[key] += 1
        if seen[key] > 1:
            offending.append(index)
    return _result("at_most_once_execution", offending)


def check_claim_integrity(events: List[Event]) -> InvariantResult:
    offending: List[int] = []
    posts: Counter = Counter()
    claims: Counter = Counter()
    executions: Counter = Counter()
    for index, event in enumerate(events):
        kind = event["kind"]
        if kind == POST:
            posts[event["message_id"]] += 1
            if posts[event["message_id"]] > 1:
                offending.append(index)
        elif kind == CLAIM_SUCCESS:
            message_id = event["message_id"]
            claims[message_id] += 1
            if posts[message_id] != 1 or claims[message_id] > 1:
                offending.append(index)
        elif kind == EXECUTE and "message_id" in event and not _is_broadcast(event):
            message_id = event["message_id"]
            executions[message_id] += 1
            if claims[message_id] != 1 or executions[message_id] > 1:
                offending.append(index)
    return _result("claim_integrity", offending)


def check_rep_consumption(events: List[Event]) -> InvariantResult:
    replies = {
        event["message_id"]: event for event in events if event["kind"] == POST and event.get("typ") == "Rep"
    }
    offending: List[int] = []
    claimed: Counter = Counter()
    for index, event in enumerate(events):
        if event["kind"] != CLAIM_SUCCESS or event["message_id"] not in replies:
            continue
        claimed[event["message_id"]] += 1
        owner = str(replies[event["message_id"]].get("frm", "")).split("/", 1)[0]
        if claimed[event["message_id"]] > 1 or event["bot"] != owner:
            offending.append(index)
    return _result("rep_consumption", offending)


def check_monotone_ticks(events: List[Event]) -> InvariantResult:
    offending = [index for index in range(1, len(events)) if events[index]["tick"] < events[index - 1]["tick"]]
    return _result("monotone_ticks", offending)


def check_post_order(events: List[Event]) -> InvariantResult:
    offending: List[int] = []
    last = -1
    for index, event in enumerate(events):
        if event["kind"] == POST:
            if event["message_id"] <= last:
                offending.append(index)
            last = max(last, event["message_id"])
    return _result("post_ids_increasing", offending)


def check_timeouts(events: List[Event], scenario: Scenario) -> InvariantResult:
    posts = _command_posts(events)
    offending: List[int] = []
    for index, event in enumerate(events):
        if event["kind"] != TIMEOUT:
            continue
        timeout = scenario.bot(event["bot"]).config.reply_timeout
        post = posts.get(event.get("ref", -1))
        if timeout is None or post is None or event["tick"] < post["tick"] + timeout:
            offending.append(index)
    return _result("timeouts_only_when_configured", offending)


class _Capabilities:
    """Which scenario bots could serve a command, built on first use and memoized per (cmd, args)."""

    def __init__(self, scenario: Scenario, manager: Optional[PluginManager]) -> None:
        self.scenario = scenario
        self.manager = manager
        self._registries: Optional[Dict[str, CommandRegistry]] = None
        self._memo: Dict[Tuple[str, str], List[str]] = {}

    @property
    def registries(self) -> Dict[str, CommandRegistry]:
        if self._registries is None:
            self._registries = {
                spec.name: build_registry(spec.config, spec.devices, commands=spec.commands, manager=self.manager).registry
                for spec in self.scenario.bots
            }
        return self._registries

    def capable(self, cmd: str, args: str) -> List[str]:
        found = self._memo.get((cmd, args))
        if found is None:
            name = cmd[len(BROADCAST_PREFIX):] if cmd.startswith(BROADCAST_PREFIX) else cmd
            found = [bot for bot, registry in self.registries.items() if registry.accepts(name, args)]
            self._memo[(cmd, args)] = found
        return found


_capability_cache: "OrderedDict[Tuple[int, int], _Capabilities]" = OrderedDict()
CAPABILITY_CACHE_SIZE = 16


def _capabilities_for(scenario: Scenario, manager: Optional[PluginManager]) -> _Capabilities:
    # repeated checks of one scenario (seed sweeps, enumerations) reuse its registries
    key = (id(scenario), id(manager))
    cached = _capability_cache.get(key)
    if cached is not None and cached.scenario is scenario and cached.manager is manager:
        _capability_cache.move_to_end(key)
        return cached
    capabilities = _Capabilities(scenario, manager)
    _capability_cache[key] = capabilities
    if len(_capability_cache) > CAPABILITY_CACHE_SIZE:
        _capability_cache.popitem(last=False)
    return capabilities


def _furthest_reads(events: List[Event]) -> Dict[str, int]:
    """Highest message id each bot has read; cursors only move forward."""

    furthest: Dict[str, int] = {}
    for event in events:
        if event["kind"] == READ:
            furthest[event["bot"]] = max(furthest.get(event["bot"], -1), event["message_id"])
    return furthest


def check_exactly_once_delivery(
    events: List[Event], scenario: Scenario, capabilities: _Capabilities
) -> InvariantResult:
    """Forwarded commands whose delivery the protocol guarantees reach their user exactly once.

    Guaranteed means: memory channel, no timeout at the originator, a frm not shared
    with another forwarded request, a capable bot whose cursor got past the command and
    an originator whose cursor got past the reply.
    """

    if not scenario.channel.has_memory:
        return _result("exactly_once_delivery", [], "memoryless channel: no guarantee")
    posts = _command_posts(events)
    frm_counts = Counter(post.get("frm") for post in posts.values() if post.get("bot"))
    furthest = _furthest_reads(events)
    reply_of = {event["ref"]: event["message_id"] for event in events if event["kind"] == POST and "ref" in event}
    deliveries: Dict[int, List[int]] = defaultdict(list)
    for index, event in enumerate(events):
        if event["kind"] == DELIVER and "ref" in event:
            deliveries[event["ref"]].append(index)

    offending: List[int] = []
    for message_id, post in posts.items():
        origin = post.get("bot")
        if not origin or _is_broadcast(post) or frm_counts[post.get("frm")] > 1:
            continue
        if scenario.bot(origin).config.reply_timeout is not None:
            continue
        got = deliveries.get(message_id, [])
        if len(got) > 1:
            offending.extend(got)
            continue
        capable = [bot for bot in capabilities.capable(post.get("cmd", ""), post.get("text", "")) if bot != origin]
        passed_command = any(furthest.get(bot, -1) >= message_id for bot in capable)
        reply_id = reply_of.get(message_id)
        passed_reply = reply_id is not None and furthest.get(origin, -1) >= reply_id
        if passed_command and passed_reply and not got:
            offending.append(events.index(post))
    return _result("exactly_once_delivery", offending)


def check_broadcast_completeness(
    events: List[Event], scenario: Scenario, capabilities: _Capabilities
) -> InvariantResult:
    """Every capable bot that saw a broadcast before its window closed answered it once."""

    offending: List[int] = []
    for post_index, post in enumerate(events):
        if post["kind"] != POST or post.get("typ") != "Cmd" or not _is_broadcast(post) or not post.get("bot"):
            continue
        message_id = post["message_id"]
        close = next(
            (
                index
                for index, event in enumerate(events)
                if event["kind"] == WITHDRAW and event.get("message_id") == message_id
            ),
            len(events),
        )
        window = events[post_index:close]
        capable = set(capabilities.capable(post["cmd"], post.get("text", "")))
        readers = {
            event["bot"]
            for event in window
            if event["kind"] == READ and event["message_id"] == message_id and event["bot"] in capable
        }
        executors = [event["bot"] for event in window if event["kind"] == EXECUTE and event.get("message_id") == message_id]
        replies = {event["message_id"] for event in window if event["kind"] == POST and event.get("ref") == message_id}
        collected = {
            event["message_id"]
            for event in window
            if event["kind"] == READ and event["bot"] == post["bot"] and event["message_id"] in replies
        }
        delivered = [event for event in events if event["kind"] == DELIVER and event.get("ref") == message_id]
        late = [event for event in events[close:] if event["kind"] == DELIVER and event.get("ref") == message_id]
        if sorted(executors) != sorted(readers) or len(delivered) != len(collected) or late:
            offending.append(post_index)
    return _result("broadcast_completeness", offending)


def summarize(trace: EventTrace) -> Dict[str, int]:
    return {
        "executions": trace.count(EXECUTE),
        "deliveries": trace.count(DELIVER),
        "timeouts": trace.count(TIMEOUT),
        "unclaimed": len(trace.unclaimed),
    }


def check_expectations(trace: EventTrace, scenario: Scenario) -> InvariantResult:
    counts = summarize(trace)
    wrong = {key: (expected, counts[key]) for key, expected in scenario.expect.items() if counts[key] != expected}
    detail = ", ".join(f"{key}: expected {expected}, got {actual}" for key, (expected, actual) in wrong.items())
    result = InvariantResult(name="expectations", passed=not wrong, detail=detail)
    return result


def check_invariants(
    trace: EventTrace, scenario: Scenario, manager: Optional[PluginManager] = None
) -> InvariantReport:
    events = trace.events
    capabilities = _capabilities_for(scenario, manager)
    return InvariantReport(
        results=[
            check_at_most_once(events),
            check_claim_integrity(events),
            check_rep_consumption(events),
            check_exactly_once_delivery(events, scenario, capabilities),
            check_broadcast_completeness(events, scenario, capabilities),
            check_timeouts(events, scenario),
            check_monotone_ticks(events),
            check_post_order(events),
            check_expectations(trace, scenario),
        ]
    )
