"""Simulator for BB84-style key distribution in two-qubit decoherence-free subspaces."""

__version__ = "0.1.0"
