"""Simulation and analysis of remote state preparation of polarization qubits."""

__version__ = "0.1.0"
