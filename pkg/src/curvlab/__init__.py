"""Curvature and symmetry analysis of spacetime metrics."""
