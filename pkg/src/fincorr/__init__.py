"""Correlation, network and multifractal analysis of financial index panels."""

__version__ = "0.1.0"
