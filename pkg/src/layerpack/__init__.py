"""Exact densities and density maximizers of layered permutation patterns."""

__version__ = "0.1.0"
