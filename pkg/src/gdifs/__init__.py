"""Graph-directed iterated function systems."""
