"""Damped coupled wave system with nonlinear boundary sources."""

__version__ = "0.1.0"
