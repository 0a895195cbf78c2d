"""Distributed coalition-formation solver for budget-constrained task allocation."""

__version__ = "0.1.0"
