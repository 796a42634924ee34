"""Numerical laboratory for corkscrew domains, cone-based Lipschitz
approximation and harmonic measure."""

__version__ = "0.1.0"
