"""Measurement-induced neural networks on matchgate circuits, simulated with fermionic covariance matrices."""

__version__ = "0.1.0"
