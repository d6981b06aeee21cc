"""Procedural spatial-reasoning pick/place benchmark engine."""

__version__ = "0.1.0"
