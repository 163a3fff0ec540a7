"""Simultaneous non-Gaussian component analysis of two subject-aligned datasets."""
__version__ = "0.1.0"
