"""Robust sparse logistic regression with automatic relevance determination."""

__version__ = "0.1.0"
