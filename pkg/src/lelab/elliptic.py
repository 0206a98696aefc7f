"""Poisson problems on the slab with q = datum on the top plane and a
Neumann datum for d3 q on the bottom plane.

Every tangential mode reduces to a two-point problem
``(d33 - |k|^2) q_k = r_k`` solved by Chebyshev collocation, with the first
and last collocation rows replaced by the boundary conditions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import BOTTOM, TOP, BoundaryTrace, Grid, ScalarField, VectorField, jacobian
from .lagrangian import LagrangianState
from .sobolev import norm_sq_coeffs

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-11
DEFAULT_MAX_ITER = 60


class SingularSystemError(RuntimeError):
    pass


class PressureNotConverged(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class MixedBVP:
    rhs: ScalarField
    dirichlet_top: BoundaryTrace
    neumann_bottom: BoundaryTrace

    def __post_init__(self):
        if self.dirichlet_top.which != TOP:
            raise ValueError("Dirichlet datum must live on the top plane")
        if self.neumann_bottom.which != BOTTOM:
            raise ValueError("Neumann datum must live on the bottom plane")

    @classmethod
    def homogeneous(cls, rhs: ScalarField) -> MixedBVP:
        return cls(rhs, BoundaryTrace.zeros(rhs.grid, TOP), BoundaryTrace.zeros(rhs.grid, BOTTOM))


@dataclass(frozen=True)
class PressureSolveReport:
    iterations: int
    final_residual: float
    contraction_estimate: float
    history: tuple[float, ...] = ()


@lru_cache(maxsize=16)
def _mode_operators(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Collocation matrices for every rfft mode and their inverses.

    Both have shape (n1, n2//2+1, n3, n3); row 0 carries the bottom Neumann
    condition and the last row the top Dirichlet condition.
    """
    D = grid.d3_matrix
    D2 = D @ D
    n = grid.n3
    ops = D2[None, None] - grid.ksq[..., None, None] * np.eye(n)
    ops[..., 0, :] = D[0]
    ops[..., -1, :] = 0.0
    ops[..., -1, -1] = 1.0
    try:
        inv = np.linalg.inv(ops)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("mode-wise boundary rows are inconsistent") from exc
    if not np.isfinite(inv).all():
        raise SingularSystemError("mode-wise collocation matrix is singular")
    ops.setflags(write=False)
    inv.setflags(write=False)
    return ops, inv


def solve_spectral(grid: Grid, b: np.ndarray) -> np.ndarray:
    """Solve every mode for rfft coefficients whose first and last vertical
    entries already hold the Neumann and Dirichlet data.

    The cached inverse is followed by one residual-correction sweep, which
    brings the result to the accuracy of a direct factorization.
    """
    ops, inv = _mode_operators(grid)
    rhs = np.stack([b.real, b.imag], axis=-1)
    x = inv @ rhs
    x += inv @ (rhs - ops @ x)
    return x[..., 0] + 1j * x[..., 1]


def _boundary_coeffs(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft2(values, norm="forward")


def solve_modes(grid: Grid, rhs: np.ndarray, neumann_bottom: np.ndarray,
                dirichlet_top: np.ndarray) -> np.ndarray:
    """Solve the mixed problem for raw physical arrays; returns physical values."""
    b = grid.forward(rhs)
    b[..., 0] = _boundary_coeffs(neumann_bottom)
    b[..., -1] = _boundary_coeffs(dirichlet_top)
    return grid.backward(solve_spectral(grid, b))


def solve_constant_poisson(bvp: MixedBVP) -> ScalarField:
    grid = bvp.rhs.grid
    return ScalarField(grid, solve_modes(grid, bvp.rhs.values, bvp.neumann_bottom.values,
                                         bvp.dirichlet_top.values))


def velocity_gradient_source(grid: Grid, grad_v: np.ndarray) -> np.ndarray:
    """-d_i v_j d_j v_i."""
    return -grid.dealias(np.einsum("ji...,ij...->...", grad_v, grad_v))


def solve_initial_pressure(v0: VectorField) -> tuple[ScalarField, BoundaryTrace]:
    """Pressure of the datum (a = I) and the top trace of d3 q0."""
    grid = v0.grid
    src = velocity_gradient_source(grid, jacobian(v0).values)
    zero = np.zeros((grid.n1, grid.n2))
    q0 = ScalarField(grid, solve_modes(grid, src, zero, zero))
    dq3 = BoundaryTrace(grid, TOP, grid.d(q0.values, 3)[..., -1])
    return q0, dq3


def _derivative_stack(grid: Grid, qh: np.ndarray) -> np.ndarray:
    """Physical d_k q (rows 0-2) and d_jk q for j <= k (rows 3-8) in one transform."""
    m1, m2 = (grid.multiplier(ax)[..., None] for ax in (1, 2))
    g1, g2, g3 = qh * m1, qh * m2, grid.d_spectral(qh, 3)
    spectral = np.stack([g1, g2, g3, g1 * m1, g1 * m2, g3 * m1, g2 * m2, g3 * m2,
                         grid.d_spectral(g3, 3)])
    return grid.backward(spectral)


_HESSIAN_ROWS = {(0, 0): 3, (0, 1): 4, (0, 2): 5, (1, 1): 6, (1, 2): 7, (2, 2): 8}


def solve_pressure(state: LagrangianState, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER,
                   guess: ScalarField | None = None) -> tuple[ScalarField, PressureSolveReport]:
    """Fixed-point solve of the variable-coefficient pressure problem.

    Each sweep solves the constant-coefficient problem whose source and
    bottom Neumann datum are evaluated from the previous iterate::

        lap q = B_jk d_jk q + (d_j B_jk) d_k q + d_t a_ji d_j v_i,
        B = I - a a^T,   d3 q = (delta_k3 - a_k3) d_k q on the bottom.

    Iterates are kept as tangential Fourier coefficients.  Raises
    PressureNotConverged when the N_1 step does not drop below ``tol``.
    """
    grid = state.grid
    mask = grid.dealias_mask[..., None]
    a = state.a.values
    at = state.a_t.values
    src_hat = grid.forward(np.einsum("ji...,ij...->...", at, state.grad_v.values)) * mask

    aat_hat = grid.forward(np.einsum("ji...,ki...->jk...", a, a)) * mask
    B = -grid.backward(aat_hat)
    for j in range(3):
        B[j, j] += 1.0
    div_b = -grid.backward(sum(grid.d_spectral(aat_hat[j], j + 1) for j in range(3)))
    bottom_coeff = -a[:, 2, ..., 0].copy()
    bottom_coeff[2] += 1.0

    qh = np.zeros((grid.n1, grid.n2 // 2 + 1, grid.n3), complex)
    if guess is not None:
        qh = grid.forward(guess.values)
    history: list[float] = []
    for it in range(1, max_iter + 1):
        derivs = _derivative_stack(grid, qh)
        grad = derivs[:3]
        pert = np.einsum("k...,k...->...", div_b, grad)
        for (j, k), row in _HESSIAN_ROWS.items():
            pert += (1.0 if j == k else 2.0) * B[j, k] * derivs[row]
        b = grid.forward(pert) * mask + src_hat
        b[..., 0] = _boundary_coeffs(np.einsum("k...,k...->...", bottom_coeff, grad[..., 0]))
        b[..., -1] = 0.0
        qh_new = solve_spectral(grid, b)
        step = math.sqrt(norm_sq_coeffs(grid, qh_new - qh, 1.0))
        history.append(step)
        qh = qh_new
        if step <= tol:
            break
    else:
        report = PressureSolveReport(max_iter, history[-1], _contraction(history), tuple(history))
        raise PressureNotConverged(
            f"pressure fixed point stalled at N1 step {history[-1]:.3e} after {max_iter} sweeps",
            report)
    report = PressureSolveReport(it, history[-1], _contraction(history), tuple(history))
    log.debug("pressure converged in %d sweeps (ratio %.3g)", it, report.contraction_estimate)
    return ScalarField(grid, grid.backward(qh)), report


def _contraction(history: list[float]) -> float:
    """Geometric mean of the last few step ratios above the round-off floor."""
    steps = np.array([s for s in history if s > 1e-13])
    if len(steps) < 2:
        return 0.0
    ratios = steps[1:] / steps[:-1]
    if len(ratios) > 1:
        ratios = ratios[1:]  # the first step measures the distance from the guess
    return float(np.exp(np.log(ratios[-3:]).mean()))


def manufactured_pressure(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(rhs, exact) for q = cos(x1) cos(pi x3 / 2), which has q = 0 on top and d3 q = 0 on the bottom."""
    x1, _, x3 = grid.mesh
    exact = np.cos(x1) * np.cos(np.pi * x3 / 2)
    return -(1.0 + (np.pi / 2) ** 2) * exact, exact


def manufactured_error(grid: Grid, zero: bool = False) -> float:
    """Max nodal error of the constant-coefficient solver on the manufactured case."""
    rhs, exact = manufactured_pressure(grid)
    if zero:
        rhs, exact = np.zeros_like(rhs), np.zeros_like(exact)
    plane = np.zeros((grid.n1, grid.n2))
    return float(np.abs(solve_modes(grid, rhs, plane, plane) - exact).max())
