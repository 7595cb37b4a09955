"""Abelian sandpile growth on Z^d: stabilization, odometers, stabilizing functions and explosions."""

__version__ = "0.1.0"
