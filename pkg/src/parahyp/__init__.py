"""Numerical laboratory for a parabolic-hyperbolic problem with an integral transmission condition."""

__version__ = "0.1.0"
