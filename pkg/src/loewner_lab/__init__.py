"""Numerical laboratory for the chordal Loewner equation."""

__version__ = "0.1.0"
