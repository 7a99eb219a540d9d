"""Quadratic forms on direct integrals and their spectral representation."""
