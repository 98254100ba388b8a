"""Resurgix: exponential integrals, thimbles, Borel resummation and wall-crossing data."""

__version__ = "1.0.0"
