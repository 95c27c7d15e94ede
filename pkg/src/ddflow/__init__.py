"""Finite-element solver and optimizer for control-constrained doubly diffusive flow."""
__version__ = "0.1.0"
