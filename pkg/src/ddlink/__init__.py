"""Delay-Doppler (OTFS) link-level simulation library."""

__version__ = "0.1.0"
