"""Homology of finitely presented FI-modules and the regularity bound."""

__version__ = "0.1.0"
