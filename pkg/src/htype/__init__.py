"""Numerical toolkit for groups of Heisenberg type and their conformal geometry."""

__version__ = "0.1.0"
