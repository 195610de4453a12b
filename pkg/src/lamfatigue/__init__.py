"""Fatigue simulation of composite laminates with cohesive interfaces and matrix cracks."""

__version__ = "0.1.0"
