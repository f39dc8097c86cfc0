"""Behavior-based translation of Petri nets into natural-language process descriptions."""

__version__ = "0.1.0"
