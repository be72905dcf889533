"""Geodesic transport lab."""
