"""Unit commitment with demand response and short-circuit-current constraints."""

__version__ = "0.1.0"
