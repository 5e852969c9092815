"""Thick-link ropelength laboratory."""
__version__ = "0.1.0"
