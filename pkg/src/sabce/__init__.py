"""Sparse adaptive bottleneck centroid-encoder feature selection."""
__version__ = "0.1.0"
