"""Entropy-based urban mobility analytics over gridded check-in records."""

__version__ = "0.1.0"
