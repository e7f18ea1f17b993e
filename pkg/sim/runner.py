"""Deterministic federation simulator.

Every tick: bots coming online start (or resume), due user lines are delivered,
then the fetch and process phases of the online bots are interleaved as the
scheduler decides, and finally pending requests expire.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Protocol, Set, Tuple

from core.botcore import POST, Bot, split_command
from core.channel import ChannelMessage, MemoryChannel
from core.commands import BROADCAST_PREFIX
from core.events import ANY_EVENT, EventRouter
from core.plugins import PluginManager, build_registry
from core.storage import InMemoryStorage
from core.wire import Envelope, MessageType, encode_envelope
from security.validation import sanitize_user_line, split_user_handle
from sim.prng import Xoshiro256
from sim.scenario import BotSpec, Intractable, Mode, Scenario, ScenarioError, WorkItem
from sim.trace import EventTrace

logger = logging.getLogger(__name__)

FETCH, PROCESS = "fetch", "process"
DEFAULT_MAX_RUNS = 200_000


class Scheduler(Protocol):
    def choose(self, options: int) -> int:
        ...


class RandomScheduler:
    def __init__(self, seed: int) -> None:
        self.rng = Xoshiro256(seed)

    def choose(self, options: int) -> int:
        return self.rng.below(options) if options > 1 else 0


class ReplayScheduler:
    """Follows a recorded prefix of choices, then always picks the first option.

    After a run, :meth:`next_prefix` advances the choice sequence like an odometer;
    iterating until it returns ``None`` visits every schedule exactly once.
    """

    def __init__(self, prefix: Optional[List[int]] = None) -> None:
        self.prefix = list(prefix or [])
        self.taken: List[Tuple[int, int]] = []

    def choose(self, options: int) -> int:
        if options <= 1:
            return 0
        position = len(self.taken)
        choice = self.prefix[position] if position < len(self.prefix) else 0
        self.taken.append((choice, options))
        return choice

    def next_prefix(self) -> Optional[List[int]]:
        for index in range(len(self.taken) - 1, -1, -1):
            choice, options = self.taken[index]
            if choice + 1 < options:
                return [taken for taken, _ in self.taken[:index]] + [choice + 1]
        return None


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        scheduler: Scheduler,
        manager: Optional[PluginManager] = None,
        channel: Optional[MemoryChannel] = None,
    ) -> None:
        self.scenario = scenario
        self.scheduler = scheduler
        self.channel = channel if channel is not None else MemoryChannel(scenario.channel)
        self.events = EventRouter()
        self.trace = EventTrace()
        self.events.subscribe(ANY_EVENT, self.trace.record)
        self.tick = 0
        self.bots: Dict[str, Bot] = {spec.name: self._build_bot(spec, manager) for spec in scenario.bots}
        self.queued: Dict[str, List[WorkItem]] = {spec.name: [] for spec in scenario.bots}
        self.online: Set[str] = set()

    def _build_bot(self, spec: BotSpec, manager: Optional[PluginManager]) -> Bot:
        try:
            context = build_registry(
                spec.config,
                spec.devices,
                commands=spec.commands,
                storage=InMemoryStorage(),
                clock=lambda: self.tick,
                manager=manager,
            )
        except KeyError as exc:
            raise ScenarioError(f"Bot {spec.name}: {exc.args[0]}") from exc
        return Bot(spec.config, context.registry, self.channel, self.events)

    def run(self) -> EventTrace:
        for tick in range(self.scenario.horizon + 1):
            self.step(tick)
        self.trace.unclaimed = [
            message.id
            for message in self.channel.history(0)
            if message.envelope.typ is MessageType.CMD and not message.envelope.cmd.startswith(BROADCAST_PREFIX)
        ]
        return self.trace

    def step(self, tick: int) -> None:
        self.tick = tick
        active: List[Bot] = []
        for spec in self.scenario.bots:
            bot = self.bots[spec.name]
            if not spec.is_online(tick):
                self.online.discard(spec.name)
                continue
            if spec.name not in self.online:
                bot.start(tick)
                self.online.add(spec.name)
            active.append(bot)

        due = [item for item in self.scenario.workload if item.tick == tick]
        for bot in active:
            backlog, self.queued[bot.name] = self.queued[bot.name], []
            for item in backlog:
                self._submit(bot, item, tick)
        for item in due:
            if item.bot is None:
                self._inject(item, tick)
            elif item.bot in self.online:
                self._submit(self.bots[item.bot], item, tick)
            else:
                self.queued[item.bot].append(item)

        self._interleave(active, tick)

        for bot in active:
            bot.expire_pending(tick)

    def _interleave(self, active: List[Bot], tick: int) -> None:
        cursors = [bot.state.cursor.next_id for bot in active if bot.state.cursor is not None]
        unread = self.channel.history(min(cursors)) if cursors else []
        if not any(bot.has_work(unread) for bot in active):
            # nothing to claim or deliver: every order yields the same trace
            for bot in active:
                bot.poll_once(tick)
            return

        remaining = {bot.name: [FETCH, PROCESS] for bot in active}
        batches: Dict[str, List[ChannelMessage]] = {}
        while True:
            ready = [bot for bot in active if remaining[bot.name]]
            if not ready:
                break
            bot = ready[self.scheduler.choose(len(ready))]
            phase = remaining[bot.name].pop(0)
            if phase == FETCH:
                batches[bot.name] = bot.fetch(tick)
            else:
                bot.process(batches.pop(bot.name), tick)

    def _submit(self, bot: Bot, item: WorkItem, tick: int) -> None:
        try:
            bot.submit_user_text(item.user, item.text, tick)
        except PermissionError:
            logger.debug("Line from %s refused by %s", item.user, bot.name)
        except ValueError as exc:
            logger.warning("Line from %s to %s dropped: %s", item.user, bot.name, exc)

    def _inject(self, item: WorkItem, tick: int) -> None:
        """A requester writing a Cmd into the channel directly, outside any bot."""

        line = sanitize_user_line(item.text)
        cmd, args = split_command(line)
        if not cmd:
            raise ScenarioError(f"Injected line at tick {tick} has no command")
        user_name, user_host = split_user_handle(item.user)
        envelope = Envelope(user_name, user_host, item.user, MessageType.CMD, cmd, args)
        message_id = self.channel.post(item.user, encode_envelope(envelope), tick, envelope)
        self.events.dispatch(
            POST,
            {
                "tick": tick,
                "kind": POST,
                "bot": "",
                "message_id": message_id,
                "typ": envelope.typ.value,
                "cmd": cmd,
                "frm": envelope.frm,
                "user": item.user,
                "text": envelope.args,
            },
        )


def run_scenario(scenario: Scenario, seed: Optional[int] = None, manager: Optional[PluginManager] = None) -> EventTrace:
    """One run; random mode draws the schedule from ``seed`` (default: the scenario's)."""

    if scenario.mode is Mode.EXHAUSTIVE:
        scheduler: Scheduler = ReplayScheduler()
    else:
        scheduler = RandomScheduler(scenario.seed if seed is None else seed)
    return Simulation(scenario, scheduler, manager=manager).run()


def enumerate_small_schedules(
    scenario: Scenario,
    max_runs: int = DEFAULT_MAX_RUNS,
    manager: Optional[PluginManager] = None,
) -> List[EventTrace]:
    """One trace per distinct interleaving of bot phases."""

    if scenario.mode is not Mode.EXHAUSTIVE:
        raise ScenarioError(f"Scenario {scenario.name} is not in exhaustive mode")
    scenario.check_tractable()

    traces: Dict[str, EventTrace] = {}
    prefix: Optional[List[int]] = []
    runs = 0
    while prefix is not None:
        runs += 1
        if runs > max_runs:
            raise Intractable(f"Scenario {scenario.name} needs more than {max_runs} runs")
        scheduler = ReplayScheduler(prefix)
        trace = Simulation(scenario, scheduler, manager=manager).run()
        traces.setdefault(trace.to_jsonl(), trace)
        prefix = scheduler.next_prefix()
    logger.info("Enumerated %d runs, %d distinct traces", runs, len(traces))
    return list(traces.values())
