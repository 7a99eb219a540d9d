"""Utility modules: errors and logging."""
