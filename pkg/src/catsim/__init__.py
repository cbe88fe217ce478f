"""Discrete-event simulation of a conductor-driven, priority-aware TCP sender."""

__version__ = "0.1.0"
