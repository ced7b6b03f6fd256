"""Numerical checks of the map-relation results."""
