"""Declarative federation experiments loaded from JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from core.channel import ChannelConfig
from core.config import BotConfig, DeviceConfig

MAX_EXHAUSTIVE_BOTS = 3
MAX_EXHAUSTIVE_HORIZON = 12
DEFAULT_ONLINE: Tuple[Tuple[int, Optional[int]], ...] = ((0, None),)
EXPECTATION_KEYS = ("executions", "deliveries", "timeouts", "unclaimed")


class ScenarioError(ValueError):
    pass


class Intractable(ScenarioError):
    pass


class Mode(str, Enum):
    RANDOM = "random"
    EXHAUSTIVE = "exhaustive"


@dataclass(slots=True)
class BotSpec:
    config: BotConfig
    devices: DeviceConfig = field(default_factory=DeviceConfig)
    # None keeps every bundled command
    commands: Optional[List[str]] = None
    # [start, end) tick ranges; end None means until the horizon
    online: List[Tuple[int, Optional[int]]] = field(default_factory=lambda: list(DEFAULT_ONLINE))

    @property
    def name(self) -> str:
        return self.config.name

    def is_online(self, tick: int) -> bool:
        return any(start <= tick and (end is None or tick < end) for start, end in self.online)


@dataclass(frozen=True, slots=True)
class WorkItem:
    tick: int
    user: str
    # None writes the line straight into the channel
    bot: Optional[str]
    text: str


@dataclass(slots=True)
class Scenario:
    bots: List[BotSpec]
    workload: List[WorkItem] = field(default_factory=list)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    horizon: int = 10
    seed: int = 0
    mode: Mode = Mode.RANDOM
    expect: Dict[str, int] = field(default_factory=dict)
    name: str = "scenario"

    def validate(self) -> "Scenario":
        if self.horizon < 0:
            raise ScenarioError("horizon must be >= 0")
        names = [spec.name for spec in self.bots]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ScenarioError("Duplicate bot names: " + ", ".join(duplicates))
        for spec in self.bots:
            for start, end in spec.online:
                if start < 0 or (end is not None and end < start):
                    raise ScenarioError(f"Bot {spec.name} has an invalid online interval [{start}, {end}]")
        for item in self.workload:
            if not 0 <= item.tick <= self.horizon:
                raise ScenarioError(f"Workload tick {item.tick} outside 0..{self.horizon}")
            if item.bot is not None and item.bot not in names:
                raise ScenarioError(f"Workload targets unknown bot {item.bot!r}")
        unknown = sorted(set(self.expect) - set(EXPECTATION_KEYS))
        if unknown:
            raise ScenarioError("Unknown expectations: " + ", ".join(unknown))
        if self.mode is Mode.EXHAUSTIVE:
            self.check_tractable()
        return self

    def check_tractable(self) -> None:
        if len(self.bots) > MAX_EXHAUSTIVE_BOTS or self.horizon > MAX_EXHAUSTIVE_HORIZON:
            raise Intractable(
                f"Exhaustive mode allows at most {MAX_EXHAUSTIVE_BOTS} bots and horizon "
                f"{MAX_EXHAUSTIVE_HORIZON} (got {len(self.bots)} bots, horizon {self.horizon})"
            )

    def bot(self, name: str) -> BotSpec:
        for spec in self.bots:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], name: str = "scenario") -> "Scenario":
        try:
            bots = [_bot_from_dict(item) for item in data["bots"]]
            workload = [
                WorkItem(
                    tick=int(item["tick"]),
                    user=str(item["user"]),
                    bot=None if item.get("bot") is None else str(item["bot"]),
                    text=str(item["text"]),
                )
                for item in data.get("workload", [])
            ]
            scenario = cls(
                bots=bots,
                workload=workload,
                channel=ChannelConfig(has_memory=bool(data.get("channel", {}).get("has_memory", True))),
                horizon=int(data["horizon"]),
                seed=int(data.get("seed", 0)),
                mode=Mode(data.get("mode", Mode.RANDOM.value)),
                expect={key: int(value) for key, value in (data.get("expect") or {}).items()},
                name=str(data.get("name", name)),
            )
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ScenarioError(f"Invalid scenario {name}: {exc!r}") from exc
        return scenario.validate()

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ScenarioError(f"Scenario file {path} does not exist") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"Scenario file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ScenarioError(f"Scenario file {path} must hold a JSON object")
        return cls.from_dict(data, name=path.stem)


def _bot_from_dict(data: Mapping[str, Any]) -> BotSpec:
    timeout = data.get("reply_timeout")
    config = BotConfig(
        name=str(data["name"]),
        backend_label=str(data.get("backend", "Local")),
        address=str(data.get("address", "127.0.0.1")),
        admins=[str(admin) for admin in data.get("admins", [])],
        reply_timeout=None if timeout is None else int(timeout),
    )
    raw_devices = data.get("devices") or {}
    devices = DeviceConfig(
        location=str(raw_devices.get("location", "room23")),
        co2_seed=int(raw_devices.get("co2_seed", 0)),
        dht_seed=int(raw_devices.get("dht_seed", 0)),
        co2_pin=raw_devices.get("co2_pin"),
        dht_pin=raw_devices.get("dht_pin"),
    )
    commands = data.get("commands")
    online = [
        (int(start), None if end is None else int(end))
        for start, end in data.get("online", DEFAULT_ONLINE)
    ]
    return BotSpec(
        config=config,
        devices=devices,
        commands=None if commands is None else [str(name) for name in commands],
        online=online,
    )
