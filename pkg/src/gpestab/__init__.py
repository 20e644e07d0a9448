"""Stability laboratory for stationary states of the quasi-1D Gross-Pitaevskii equation."""

__version__ = "0.1.0"
