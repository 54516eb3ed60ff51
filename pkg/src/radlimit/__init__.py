"""Kinetic radiative heat transfer, its nonlinear diffusion limit, and
relative-entropy diagnostics."""

__version__ = "0.1.0"
