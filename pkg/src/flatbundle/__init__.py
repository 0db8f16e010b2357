"""Flat surfaces, Fuchsian group approximations, and coarse-geometry harnesses."""

__version__ = "0.1.0"
