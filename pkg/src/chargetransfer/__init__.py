"""Spectral simulation of scalar and matrix charge transfer Schrödinger equations."""
__version__ = "0.1.0"
