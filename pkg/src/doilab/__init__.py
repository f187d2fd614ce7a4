"""Finite-dimensional laboratory for double operator integrals and spectral shift functions."""

__version__ = "0.1.0"
