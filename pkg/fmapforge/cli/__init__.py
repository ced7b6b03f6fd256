"""CLI entrypoints for FmapForge."""
