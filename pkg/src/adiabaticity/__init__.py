"""Adiabaticity measures for quantum transitions in time-dependent systems."""

__version__ = "0.1.0"
