"""Marginal likelihood of Gaussian graphical models by telescoping block decomposition."""

__version__ = "0.1.0"
