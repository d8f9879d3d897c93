"""Central qubit dephasing against an LMG spin environment: spectra, quench
dynamics, quantum speed limit and non-Markovianity."""

__version__ = "0.1.0"
