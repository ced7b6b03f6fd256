"""Truncated Laplace-Beltrami eigenbases and their on-disk cache."""
