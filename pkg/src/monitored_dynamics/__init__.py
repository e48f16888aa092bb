"""Quantum-trajectory simulation of noisy monitored multi-qubit dynamics."""

__version__ = "0.1.0"
