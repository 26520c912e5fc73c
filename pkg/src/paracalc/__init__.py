"""Spectral paracontrolled calculus on the 2-torus."""
__version__ = "0.1.0"
