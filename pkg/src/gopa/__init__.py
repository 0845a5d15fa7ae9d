"""Differentially private averaging with pairwise-canceling noise and a public audit trail."""

__version__ = "0.1.0"
