"""Pulse-level and lattice-level simulation of a resonator-lattice one-way quantum computer."""

from . import cluster, device, hilbert, pulses, resources

__version__ = "0.1.0"

__all__ = ["cluster", "device", "hilbert", "pulses", "resources", "__version__"]
