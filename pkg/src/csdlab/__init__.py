"""Pseudo-spectral laboratory for the two-dimensional Chern-Simons-Dirac system in Coulomb gauge."""

__version__ = "0.1.0"
