"""Executable model instances and seeded generators."""
