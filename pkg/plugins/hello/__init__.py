"""Hello world plugin package."""
