"""Effective one-dimensional models for atoms in strong magnetic fields."""

__version__ = "0.1.0"
