import ast
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plugins.sensors.models import (
    SensorKind,
    SensorModel,
    UnknownSensor,
    co2_model,
    co2_read,
    dht22_model,
    format_temperature,
    temp_read,
)

TEMP_LINE = re.compile(r"^Temp: (-?\d+\.\d) F / (-?\d+\.\d) C    Humidity: (\d+\.\d)$")


def test_pinned_co2_reproduces_printed_reading():
    model = co2_model("room23", seed=0, pin={"co2": 1099, "temperature": 26, "UhUl": 4608})
    assert co2_read("room23", model) == "{'co2': 1099, 'temperature': 26, 'TT': 66, 'SS': 0, 'UhUl': 4608}"


def test_co2_rejects_foreign_location():
    with pytest.raises(UnknownSensor):
        co2_read("room99", co2_model("room23", seed=1))


def test_temperature_examples():
    assert format_temperature(21.0, 57.1) == "Temp: 69.8 F / 21.0 C    Humidity: 57.1"
    assert format_temperature(0.0, 40.0).startswith("Temp: 32.0 F / 0.0 C")


def test_temp_rejects_foreign_location():
    with pytest.raises(UnknownSensor):
        temp_read("garage", dht22_model("kitchen", seed=1))


@settings(max_examples=1000)
@given(seed=st.integers(min_value=0, max_value=2**32), steps=st.integers(min_value=1, max_value=5))
def test_co2_register_invariants(seed, steps):
    model = co2_model("room23", seed=seed)
    for _ in range(steps):
        reading = ast.literal_eval(co2_read("", model))
    assert list(reading) == ["co2", "temperature", "TT", "SS", "UhUl"]
    assert 400 <= reading["co2"] <= 5000
    assert reading["TT"] - reading["temperature"] == 40
    assert reading["SS"] == 0
    assert 0 <= reading["UhUl"] < 65536


@settings(max_examples=1000)
@given(seed=st.integers(min_value=0, max_value=2**32), steps=st.integers(min_value=1, max_value=5))
def test_temperature_line_satisfies_fahrenheit_relation(seed, steps):
    model = dht22_model("kitchen", seed=seed)
    for _ in range(steps):
        line = temp_read("kitchen", model)
    match = TEMP_LINE.match(line)
    assert match, line
    fahrenheit, celsius, humidity = (float(group) for group in match.groups())
    assert abs(fahrenheit - (1.8 * celsius + 32)) <= 0.05
    assert 0.0 <= humidity <= 100.0


def test_same_seed_same_sequence():
    first = co2_model("room23", seed=42)
    second = co2_model("room23", seed=42)
    assert [co2_read("", first) for _ in range(20)] == [co2_read("", second) for _ in range(20)]


def test_walk_steps_are_bounded():
    model = SensorModel(seed=9, location="room23", kind=SensorKind.CO2)
    previous = model.step()
    for _ in range(200):
        current = model.step()
        assert abs(current["co2"] - previous["co2"]) <= 5
        assert abs(current["temperature"] - previous["temperature"]) <= 0.3 + 1e-9
        previous = current
