"""Core framework for federated bots sharing a C&C channel."""

__all__ = [
    "botcore",
    "channel",
    "commands",
    "config",
    "events",
    "logging",
    "plugins",
    "runtime",
    "storage",
    "wire",
]
