"""Functional map solver: masks, regularised least squares, self-adaptive parameters."""
