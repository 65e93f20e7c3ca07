"""Integration tests for homog-lab (commands through the CLI entry point)."""
