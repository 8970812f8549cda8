"""Numerical lab for the stochastic thin-film equation on the one-dimensional torus."""

__version__ = "0.1.0"
