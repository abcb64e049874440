"""Pseudo-spectral simulator for the nonlinear Maxwell-Schroedinger system."""
from .kernels import BACKEND
from .physics import PhysParams, State
from .spectral import Grid, make_grid

__version__ = "0.1.0"
__all__ = ["BACKEND", "Grid", "PhysParams", "State", "make_grid"]
