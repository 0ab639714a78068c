"""Numerical laboratory for bundle-switching partially hyperbolic skew
products over hyperbolic toral automorphisms and suspension flows."""

__version__ = "0.1.0"
