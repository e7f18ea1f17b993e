"""Simulated relay switch package."""
