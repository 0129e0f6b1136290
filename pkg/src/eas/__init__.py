"""Efficient architecture search by function-preserving network transformation."""

__version__ = "0.1.0"
