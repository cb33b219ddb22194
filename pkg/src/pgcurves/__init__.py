"""Piecewise geodesic Jordan curves: weldings, explicit geodesic pairs and Schwarzians."""

__version__ = "0.1.0"
