"""Constructive 7-colorings of large spheres built from deformed Goldberg tilings."""

__version__ = "0.1.0"
