"""Finite-time repeated interactions: scattering-operator master equations,
closed-form special cases, and Monte-Carlo validation."""

__version__ = "0.1.0"
