"""Correspondence evaluation: geodesic error, PCK, AUC."""
