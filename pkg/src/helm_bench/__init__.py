"""Deterministic USV target-following simulator and tracking benchmark."""

__version__ = "0.1.0"
