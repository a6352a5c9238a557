"""Numerical toolkit for radial Kähler potentials chi(log|z|^2): metric,
distances, Ricci curvature, Orlicz integrability and independent oracles."""

__version__ = "0.1.0"
