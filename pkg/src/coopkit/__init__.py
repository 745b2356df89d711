"""Cooperative V2X perception toolkit."""

__version__ = "0.1.0"
