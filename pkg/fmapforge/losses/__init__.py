"""Unsupervised loss terms."""
