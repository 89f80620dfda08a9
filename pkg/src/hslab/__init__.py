"""Sampling, exact formulas and numerical checks for half-space Macdonald processes."""

__version__ = "0.1.0"
