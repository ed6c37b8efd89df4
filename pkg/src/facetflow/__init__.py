"""Relaxed 1-Laplacian + p-Laplacian systems."""

__version__ = "0.1.0"
