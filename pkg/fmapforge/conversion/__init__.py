"""Conversions between point-wise maps and functional maps."""
