"""Sensor plugin: ``co2 [location]`` and ``temp [location]`` over seeded device models."""

from __future__ import annotations

from core.commands import CommandSpec
from core.plugins import BasePlugin, PluginContext

from .models import co2_model, co2_read, dht22_model, temp_read


class SensorsPlugin(BasePlugin):
    key = "sensors"
    name = "Sensors"
    description = "MH-Z19 CO2 and DHT22 temperature/humidity readings for this bot's location."

    def register(self, context: PluginContext) -> None:
        logger = context.get_logger(self.key)
        devices = context.devices
        co2 = co2_model(devices.location, devices.co2_seed, devices.co2_pin)
        dht = dht22_model(devices.location, devices.dht_seed, devices.dht_pin)
        logger.debug("Sensors for %s at %s (seeds %s/%s)", context.config.name, devices.location, co2.seed, dht.seed)

        context.add_command(
            CommandSpec(
                "co2",
                lambda args: co2_read(args, co2),
                validator=co2.owns,
                description=f"CO2 reading at {devices.location}",
            )
        )
        context.add_command(
            CommandSpec(
                "temp",
                lambda args: temp_read(args, dht),
                validator=dht.owns,
                description=f"Temperature and humidity at {devices.location}",
            )
        )


plugin = SensorsPlugin()
