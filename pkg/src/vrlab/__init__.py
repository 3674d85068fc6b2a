"""Numerical laboratory for viscous vortex rings started from a circular filament."""

__version__ = "0.1.0"
