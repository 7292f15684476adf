"""Prosodic entrainment analysis for task-oriented dialog."""

__version__ = "0.1.0"
