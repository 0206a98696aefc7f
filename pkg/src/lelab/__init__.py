"""Numerical laboratory for free-boundary incompressible Euler flow in
Lagrangian coordinates on the slab T^2 x (0, 1)."""
from .grid import BOTTOM, TOP, BoundaryTrace, Grid, ScalarField, TensorField, VectorField
from .lagrangian import LagrangianState

__version__ = "0.1.0"

__all__ = [
    "BOTTOM",
    "TOP",
    "BoundaryTrace",
    "Grid",
    "LagrangianState",
    "ScalarField",
    "TensorField",
    "VectorField",
]
