"""Input validation and sanitization for front-channel lines and configuration values."""

from __future__ import annotations

import re

_IDENTIFIER = re.compile(r"^[A-Za-z0-9._-]+$")


# ---- Front channel ----

def sanitize_user_line(value: str, max_length: int = 500) -> str:
    """Sanitize one line typed by a user at a bot."""

    if not isinstance(value, str):
        raise ValueError("Value must be a string")

    # Remove null bytes and trim whitespace
    value = value.replace("\x00", "").strip()

    if len(value) > max_length:
        raise ValueError(f"Line too long (max {max_length} characters)")

    return value


def split_user_handle(handle: str) -> tuple[str, str]:
    """``name@host`` -> (name, host); a bare name has an empty host."""

    name, _, host = handle.partition("@")
    return name, host


# ---- Configuration ----

def validate_bot_name(value: str, max_length: int = 64) -> str:
    """
    Validate a bot name.
    Names end up inside the ``frm`` correlation key (``<bot>/<user>``),
    so the separator is not allowed.
    """
    if not isinstance(value, str):
        raise ValueError("Bot name must be a string")

    value = value.strip()
    if not value:
        raise ValueError("Bot name cannot be empty")

    if len(value) > max_length:
        raise ValueError(f"Bot name too long (max {max_length} characters)")

    if not _IDENTIFIER.match(value):
        raise ValueError("Bot name contains invalid characters (use letters, numbers, dots, hyphens, underscores)")

    return value


def validate_location(value: str, max_length: int = 64) -> str:
    if not isinstance(value, str):
        raise ValueError("Location must be a string")

    value = value.strip()
    if not value or len(value) > max_length or not _IDENTIFIER.match(value):
        raise ValueError(f"Invalid sensor location {value!r}")

    return value


def parse_name_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]
