"""Lagrangian unknowns and the algebraic identities that bind them.

The particle map is stored as its periodic displacement ``xi = eta - x``;
``grad_eta = I + grad xi`` with entries ``J[i, j] = d_j eta_i``, and the
cofactor matrix ``a`` inverts ``J`` whenever ``det J = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .grid import (
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    curl_array,
    gradient_array,
    jacobian,
)

EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0


def _cross(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.stack([u[1] * w[2] - u[2] * w[1],
                     u[2] * w[0] - u[0] * w[2],
                     u[0] * w[1] - u[1] * w[0]])


def adjugate(J: np.ndarray) -> np.ndarray:
    """Pointwise a_ij = 1/2 eps_imn eps_jkl J_km J_ln for arrays of shape (3, 3, ...).

    Contracting the inner symbol first turns the formula into cross products
    of the columns c_m = J[:, m]: row i of a is c_{i+1} x c_{i+2}.
    """
    c = [J[:, m] for m in range(3)]
    return np.stack([_cross(c[(i + 1) % 3], c[(i + 2) % 3]) for i in range(3)])


def adjugate_rate(J: np.ndarray, Jdot: np.ndarray) -> np.ndarray:
    """Pointwise eps_imn eps_jkl Jdot_km J_ln, the time derivative of ``adjugate``."""
    c = [J[:, m] for m in range(3)]
    d = [Jdot[:, m] for m in range(3)]
    rows = []
    for i in range(3):
        m, n = (i + 1) % 3, (i + 2) % 3
        rows.append(_cross(d[m], c[n]) - _cross(d[n], c[m]))
    return np.stack(rows)


def determinant(J: np.ndarray) -> np.ndarray:
    """Pointwise det J = c_0 . (c_1 x c_2)."""
    return np.einsum("i...,i...->...", J[:, 0], _cross(J[:, 1], J[:, 2]))


def cofactor(grad_eta: TensorField) -> TensorField:
    """Cofactor matrix from the permutation-symbol formula (no inversion)."""
    g = grad_eta.grid
    return TensorField(g, g.dealias(adjugate(grad_eta.values)))


def cofactor_rate(grad_eta: TensorField, grad_v: TensorField) -> TensorField:
    """Time derivative of the cofactor matrix given d/dt grad_eta = grad_v."""
    g = grad_eta.grid
    return TensorField(g, g.dealias(adjugate_rate(grad_eta.values, grad_v.values)))


def jacobian_det(grad_eta: TensorField) -> ScalarField:
    g = grad_eta.grid
    return ScalarField(g, g.dealias(determinant(grad_eta.values)))


def piola_divergence(a: TensorField) -> VectorField:
    """Components d_k a_ki, i = 1, 2, 3."""
    g = a.grid
    return VectorField(g, np.stack([
        sum(g.d(a.values[k, i], k + 1) for k in range(3)) for i in range(3)
    ]))


_KINEMATIC_CACHES = ("eta", "grad_eta", "grad_v", "a", "a_t", "det")


@dataclass(frozen=True, eq=False)
class LagrangianState:
    """Immutable snapshot (t, eta, v, q) with omega0 frozen from the initial datum."""

    t: float
    displacement: VectorField
    v: VectorField
    omega0: VectorField
    q: ScalarField | None = None
    extras: dict = field(default_factory=dict, repr=False)

    @classmethod
    def initial(cls, v0: VectorField, t: float = 0.0) -> LagrangianState:
        return cls(t=t, displacement=VectorField.zeros(v0.grid), v=v0,
                   omega0=initial_vorticity(v0))

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @cached_property
    def eta(self) -> np.ndarray:
        """Particle positions x + xi as a raw (3, n1, n2, n3) array."""
        return np.stack(self.grid.mesh) + self.displacement.values

    @cached_property
    def grad_eta(self) -> TensorField:
        J = TensorField.identity(self.grid).values + np.swapaxes(
            gradient_array(self.grid, self.displacement.values), 0, 1)
        return TensorField(self.grid, J)

    @cached_property
    def grad_v(self) -> TensorField:
        return jacobian(self.v)

    @cached_property
    def a(self) -> TensorField:
        return cofactor(self.grad_eta)

    @cached_property
    def a_t(self) -> TensorField:
        return cofactor_rate(self.grad_eta, self.grad_v)

    @cached_property
    def det(self) -> ScalarField:
        return jacobian_det(self.grad_eta)

    def with_pressure(self, q: ScalarField) -> LagrangianState:
        """Same kinematics with a pressure attached; pressure-free caches carry over."""
        new = replace(self, q=q, extras=dict(self.extras))
        for name in _KINEMATIC_CACHES:
            if name in self.__dict__:
                new.__dict__[name] = self.__dict__[name]
        return new

    def advanced(self, t: float, displacement: VectorField, v: VectorField) -> LagrangianState:
        return LagrangianState(t=t, displacement=displacement, v=v, omega0=self.omega0)


def _axial(M: np.ndarray) -> np.ndarray:
    """eps_ijk M_jk."""
    return np.stack([M[1, 2] - M[2, 1], M[2, 0] - M[0, 2], M[0, 1] - M[1, 0]])


def initial_vorticity(v0: VectorField) -> VectorField:
    """curl v0 in the discrete form of the Cauchy term at the identity map.

    Using the same products and the same dealiasing makes the invariance
    residual vanish identically at t = 0.
    """
    g = v0.grid
    G = jacobian(v0).values  # [m, j] = d_j v_m
    return VectorField(g, g.dealias(_axial(np.swapaxes(G, 0, 1))))


def _cauchy_term(state: LagrangianState) -> np.ndarray:
    # eps_ijk d_j v_m d_k eta_m
    G, J = state.grad_v.values, state.grad_eta.values
    M = np.einsum("mj...,mk...->jk...", G, J)
    return state.grid.dealias(_axial(M))


def cauchy_invariance_residual(state: LagrangianState) -> VectorField:
    """eps_ijk d_j v_m d_k eta_m - (omega0)_i."""
    return VectorField(state.grid, _cauchy_term(state) - state.omega0.values)


def curl_identity_residual(state: LagrangianState) -> VectorField:
    """curl v - [eps_ijk (delta_km - d_k eta_m) d_j v_m + (omega0)_i], both sides dealiased."""
    g = state.grid
    G, J = state.grad_v.values, state.grad_eta.values
    defect = TensorField.identity(g).values - J  # delta_mk - d_k eta_m, indexed [m, k]
    M = np.einsum("mk...,mj...->jk...", defect, G)
    rhs = g.dealias(_axial(M)) + state.omega0.values
    return VectorField(g, g.dealias(curl_array(g, state.v.values)) - rhs)


def lagrangian_divergence(state: LagrangianState) -> ScalarField:
    """a_ik d_i v_k."""
    a, G = state.a.values, state.grad_v.values
    return ScalarField(state.grid, state.grid.dealias(np.einsum("ik...,ki...->...", a, G)))
