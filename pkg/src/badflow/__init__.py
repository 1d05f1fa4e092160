"""Weighted badly approximable vectors: lattice tools, diagonal-flow orbits and
the interval-survival construction along a nondegenerate curve."""

__version__ = "0.1.0"
