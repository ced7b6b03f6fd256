"""FmapForge: spectral non-rigid shape matching with a self-adaptive functional map solver."""

__version__ = "0.1.0"
