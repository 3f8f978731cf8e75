"""Quantum test particles in accelerated frames: exact operator algebra, coordinate charts,
truncated-Hilbert-space dynamics and the Ehrenfest support check."""

__version__ = "0.1.0"
