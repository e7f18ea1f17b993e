"""Seeded stand-ins for the MH-Z19 CO2 sensor and the DHT22 temperature/humidity sensor."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Optional

CO2_MIN, CO2_MAX = 400, 5000
CO2_STEP = 5
TEMP_STEP = 0.3
HUMIDITY_STEP = 0.5
# MH-Z19 reports its internal temperature with a +40 offset in the TT register
TT_OFFSET = 40


class UnknownSensor(ValueError):
    pass


class SensorKind(str, Enum):
    CO2 = "co2"
    DHT22 = "dht22"


def _clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))


@dataclass(slots=True)
class SensorModel:
    """Bounded random walk; identical seed and call sequence give identical readings."""

    seed: int
    location: str
    kind: SensorKind
    state: Dict[str, Any] = field(default_factory=dict)
    pinned: bool = False
    rng: random.Random = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.rng = random.Random(self.seed)
        if self.state:
            return
        if self.kind is SensorKind.CO2:
            self.state = {
                "co2": self.rng.randint(600, 1200),
                "temperature": self.rng.uniform(18.0, 26.0),
                "UhUl": self.rng.randrange(0, 65536),
            }
        else:
            self.state = {
                "temperature": self.rng.uniform(15.0, 25.0),
                "humidity": self.rng.uniform(35.0, 65.0),
            }

    @classmethod
    def pinned_to(cls, location: str, kind: SensorKind, values: Mapping[str, Any]) -> "SensorModel":
        return cls(seed=0, location=location, kind=kind, state=dict(values), pinned=True)

    def owns(self, args: str) -> bool:
        target = args.strip()
        return not target or target == self.location

    def step(self) -> Dict[str, Any]:
        if self.pinned:
            return dict(self.state)
        state = self.state
        state["temperature"] = _clamp(state["temperature"] + self.rng.uniform(-TEMP_STEP, TEMP_STEP), -40.0, 80.0)
        if self.kind is SensorKind.CO2:
            state["co2"] = int(_clamp(state["co2"] + self.rng.randint(-CO2_STEP, CO2_STEP), CO2_MIN, CO2_MAX))
        else:
            state["humidity"] = _clamp(
                state["humidity"] + self.rng.uniform(-HUMIDITY_STEP, HUMIDITY_STEP), 0.0, 100.0
            )
        return dict(state)


def _check_location(args: str, model: SensorModel) -> None:
    if not model.owns(args):
        raise UnknownSensor(f"No {model.kind.value} sensor at {args.strip()!r} (this bot has {model.location})")


def read_co2(model: SensorModel) -> Dict[str, int]:
    reading = model.step()
    temperature = int(round(reading["temperature"]))
    return {
        "co2": int(reading["co2"]),
        "temperature": temperature,
        "TT": temperature + TT_OFFSET,
        "SS": 0,
        "UhUl": int(reading["UhUl"]) % 65536,
    }


def co2_read(args: str, model: SensorModel) -> str:
    """The raw register dump, rendered the way ``mh_z19.read_all()`` prints."""

    _check_location(args, model)
    return str(read_co2(model))


def format_temperature(celsius: float, humidity: float) -> str:
    c = round(celsius, 1)
    f = c * 1.8 + 32
    h = _clamp(round(humidity, 1), 0.0, 100.0)
    return f"Temp: {f:.1f} F / {c:.1f} C    Humidity: {h:.1f}"


def temp_read(args: str, model: SensorModel) -> str:
    _check_location(args, model)
    reading = model.step()
    return format_temperature(reading["temperature"], reading["humidity"])


def co2_model(location: str, seed: int, pin: Optional[Mapping[str, Any]] = None) -> SensorModel:
    if pin:
        values = {"co2": 400, "temperature": 20, "UhUl": 0, **pin}
        return SensorModel.pinned_to(location, SensorKind.CO2, values)
    return SensorModel(seed=seed, location=location, kind=SensorKind.CO2)


def dht22_model(location: str, seed: int, pin: Optional[Mapping[str, Any]] = None) -> SensorModel:
    if pin:
        values = {"temperature": 20.0, "humidity": 50.0, **pin}
        return SensorModel.pinned_to(location, SensorKind.DHT22, values)
    return SensorModel(seed=seed, location=location, kind=SensorKind.DHT22)
