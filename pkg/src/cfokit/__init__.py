"""Toolkit for cluster first-order logic on ordered coloured graphs."""

__version__ = "0.1.0"
