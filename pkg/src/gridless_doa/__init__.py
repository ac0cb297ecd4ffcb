"""Gridless multi-frequency DOA estimation by regularization-free SDPs."""
