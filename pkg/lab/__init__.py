"""Wiener Heat Lab: numerical verification of Gaussian calculus on truncated Hilbert spaces."""

__version__ = "1.0.0"
