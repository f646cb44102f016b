"""Boundary-element toolkit for exterior impedance scattering.

Computes the spectrum of the Neumann-to-Dirichlet operator on closed
surfaces, solves the impedance/Dirichlet scattering problems, assembles
the far-field operator and scattering matrix, and locates low-frequency
resonance poles, with a closed-form unit-sphere reference throughout.
"""

__version__ = "0.1.0"
