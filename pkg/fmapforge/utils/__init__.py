"""Utility functions: file I/O, binary array files, terminal tables."""
