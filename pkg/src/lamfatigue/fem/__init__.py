"""Mesh, assembly and nonlinear solution."""
