"""Measure spaces and direct-integral Hilbert spaces."""
