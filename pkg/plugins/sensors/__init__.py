"""Simulated environment sensors (CO2 and temperature/humidity)."""
