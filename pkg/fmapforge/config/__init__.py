"""Configuration management for FmapForge."""
