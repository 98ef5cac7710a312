"""Desk-scale numerical laboratory for Ricci flow uniqueness on warped cylinders."""
__version__ = "0.1.0"
