from __future__ import annotations

import logging
from typing import Any, Dict


def setup_logging(level: str = "INFO") -> None:
    """Configure application-wide logging."""

    # basicConfig is a no-op if already configured; force with handlers reset
    root = logging.getLogger()
    if root.handlers:
        for handler in list(root.handlers):
            root.removeHandler(handler)
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s | %(levelname)8s | %(name)s | %(message)s",
    )


def get_plugin_logger(key: str) -> logging.Logger:
    return logging.getLogger(f"plugins.{key}")


def get_bot_logger(name: str) -> logging.Logger:
    return logging.getLogger(f"bots.{name}")


def log_protocol_event(event_type: str, payload: Dict[str, Any]) -> None:
    """EventRouter subscriber that mirrors protocol events into the bot's logger."""

    logger = get_bot_logger(str(payload.get("bot") or "channel"))
    details = " ".join(f"{key}={value}" for key, value in payload.items() if value is not None and key != "bot")
    logger.debug("%s %s", event_type, details)
