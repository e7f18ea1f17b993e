"""Hello world plugin: the smallest possible command."""

from __future__ import annotations

from core.commands import CommandSpec
from core.plugins import BasePlugin, PluginContext

GREETING = "Hello, world!"


def hello_cmd(args: str) -> str:
    return GREETING


class HelloPlugin(BasePlugin):
    key = "hello"
    name = "Hello"
    description = "Answers every call with a greeting."

    def register(self, context: PluginContext) -> None:
        context.add_command(CommandSpec("hello", hello_cmd, description="Say hello"))


plugin = HelloPlugin()
