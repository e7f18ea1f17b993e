"""Placeholder webcam package."""
