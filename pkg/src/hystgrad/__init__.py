"""Gradient-system realizations of hysteresis transition graphs."""

from .config import Config, DEFAULT_CONFIG

__all__ = ["Config", "DEFAULT_CONFIG"]
__version__ = "0.1.0"
