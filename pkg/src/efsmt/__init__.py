"""Exists-forall constraint solving over bounded domains."""

__version__ = "0.1.0"
