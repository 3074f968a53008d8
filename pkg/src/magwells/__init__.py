"""Spectral tools for semiclassical magnetic Schrödinger operators with magnetic wells."""

__version__ = "0.1.0"
