"""Rotatable-antenna mixed near-field/far-field downlink simulator."""

__version__ = "0.1.0"
