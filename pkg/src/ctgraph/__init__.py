"""Continuous-time dynamic graph learning with intensity-modulated attention."""

__version__ = "0.1.0"
