"""Finite groups, regular representations and invariant forms."""
