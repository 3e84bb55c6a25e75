"""Cooperative sensor planning as a potential game with mutual-information utilities."""

__version__ = "0.1.0"
