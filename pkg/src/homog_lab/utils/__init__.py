"""Utility helpers: logging setup, input validation and file I/O."""
