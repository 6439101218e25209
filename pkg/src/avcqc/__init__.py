"""Capacities and random correlated codes for arbitrarily varying classical-quantum channels."""

__version__ = "0.1.0"
