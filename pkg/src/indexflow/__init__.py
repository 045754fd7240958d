"""Spectral flow, Maslov index and bifurcation radii for indefinite elliptic systems."""
__version__ = "0.1.0"
