"""Relay plugin: switch an external device on and off."""

from __future__ import annotations

from core.commands import CommandSpec
from core.plugins import BasePlugin, PluginContext

from .state import RelayState, relay_switch

ACTIONS = frozenset({"on", "off", "status"})


class RelayPlugin(BasePlugin):
    key = "relay"
    name = "Relay"
    description = "Sonoff-style relay switch with optional persisted state."

    def register(self, context: PluginContext) -> None:
        logger = context.get_logger(self.key)
        state = RelayState.load(context.storage, context.devices.persist_relay)
        logger.debug("Relay for %s starts %s", context.config.name, state.label())

        context.add_command(
            CommandSpec(
                "relay",
                lambda args: relay_switch(args, state),
                validator=lambda args: args.strip() in ACTIONS,
                description="relay on|off|status",
            )
        )


plugin = RelayPlugin()
