"""Speckle-robust variational segmentation with convex fast solvers."""

__version__ = "0.1.0"
