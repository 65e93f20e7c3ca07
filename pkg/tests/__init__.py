"""Tests for homog-lab."""
