"""Harmonic-explorer / SLE(4) lattice simulator and verification toolkit."""

__version__ = "0.1.0"
