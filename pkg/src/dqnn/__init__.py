"""Density-matrix simulator and training engine for layered deep quantum neural networks."""

__version__ = "0.1.0"
