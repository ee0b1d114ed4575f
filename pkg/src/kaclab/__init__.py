"""Numerical laboratory for the d-dimensional Kac model."""

__version__ = "0.1.0"
