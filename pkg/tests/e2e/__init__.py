"""End-to-end tests for homog-lab (full workflows)."""
