"""Multipolar light-matter dynamics for finite tight-binding chains."""

from .constants import C_LIGHT, HBAR

__all__ = ["C_LIGHT", "HBAR"]
__version__ = "0.1.0"
