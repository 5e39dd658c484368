"""Performance tests package."""
