"""Report rendering: summary tables and matplotlib SVG charts."""
