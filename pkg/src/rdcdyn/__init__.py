"""Discrete-state dynamics from residual dipolar couplings."""

__version__ = "0.1.0"
