"""Numerical services: Galerkin correctors, effective tensors, SDEs, diagnostics."""
