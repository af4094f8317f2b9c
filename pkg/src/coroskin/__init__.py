"""Coronary vessel tree reconstruction, skinning and cardiac-cycle deformation."""

__version__ = "0.1.0"
