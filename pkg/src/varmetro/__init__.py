"""Variational probe-state optimisation for noisy quantum metrology."""

__version__ = "0.1.0"
