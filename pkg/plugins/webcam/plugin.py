"""Webcam plugin. Images are not transferred; the reply names the frame instead."""

from __future__ import annotations

from core.commands import CommandSpec
from core.plugins import BasePlugin, PluginContext


class WebcamPlugin(BasePlugin):
    key = "webcam"
    name = "Webcam"
    description = "Snapshot reference for this bot's camera."

    def register(self, context: PluginContext) -> None:
        location = context.devices.location

        def cam(args: str) -> str:
            return f"image:{location}:{context.clock()}"

        context.add_command(
            CommandSpec(
                "cam",
                cam,
                validator=lambda args: not args.strip() or args.strip() == location,
                description=f"Camera snapshot at {location}",
            )
        )


plugin = WebcamPlugin()
