"""Synthetic gauge fields for the relative motion of two Rydberg atoms.

Two atoms, one in an s state and one in a p state, exchange their excitation
through the dipole-dipole interaction. The adiabatic eigenstates of that
16-level problem define potential surfaces plus Abelian and non-Abelian
vector potentials acting on the interatomic coordinate.
"""

from .model import ModelParams, Position, build_basis, grad_hint, hint, jz_matrix

__version__ = "0.1.0"

__all__ = ["ModelParams", "Position", "build_basis", "grad_hint", "hint", "jz_matrix", "__version__"]
