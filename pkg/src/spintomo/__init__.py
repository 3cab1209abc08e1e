"""Tomography of small driven spin networks from local measurements.

The package simulates local spin measurements on a time-dependent spin
network, reconstructs Heisenberg-picture observables from them, trains a
small neural network constrained by the Heisenberg equation of motion to
predict the Hamiltonian, and scores the recovered coupling structure.
"""

__version__ = "0.1.0"
