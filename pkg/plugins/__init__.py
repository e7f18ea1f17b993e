"""Bundled device plugins. Each subpackage exposes ``plugin`` from its ``plugin.py``."""

__all__ = []
