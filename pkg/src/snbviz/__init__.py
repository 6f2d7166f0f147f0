"""Collaborative viewer/editor toolkit for molecular structure graphs."""

__version__ = "0.1.0"
