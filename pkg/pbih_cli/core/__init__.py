"""Core logic for expressions, geometry, residual systems, catalog, search and runs."""
