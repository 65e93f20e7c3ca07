"""Unit tests for homog-lab (fast, isolated)."""
