"""Front-door authorization and input sanitisation."""

__all__ = [
    "auth",
    "validation",
]
