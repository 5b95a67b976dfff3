"""Numerical laboratory for fractional Fisher-KPP front propagation."""

__version__ = "0.1.0"
