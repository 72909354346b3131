"""Automatic semantic-aware person compositing toolkit."""

__version__ = "0.1.0"
