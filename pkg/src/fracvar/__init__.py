"""Fractional variational problems with free end-points: direct solver and checks."""

__version__ = "0.1.0"
