"""Per-vertex spectral descriptors (HKS, WKS) and external feature files."""
