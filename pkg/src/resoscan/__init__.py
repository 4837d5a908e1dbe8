"""Resonance identification for radial quantum scattering on a grid."""

__version__ = "0.1.0"
