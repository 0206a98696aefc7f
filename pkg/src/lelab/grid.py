"""Discretization of the slab T^2 x (0, 1).

Tangential directions are 2*pi-periodic and carried by real FFTs; the
vertical direction uses Chebyshev-Lobatto collocation mapped onto [0, 1],
with node 0 on the bottom plane and node n3-1 on the top plane.

All field arrays have the three spatial axes last, ``(..., n1, n2, n3)``,
so vector and tensor fields are plain stacks of scalar arrays.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.fft

BOTTOM = "bottom"  # Gamma_0 = {x3 = 0}
TOP = "top"  # Gamma_1 = {x3 = 1}
Plane = Literal["bottom", "top"]

_TANGENTIAL_AXES = (-3, -2)


def fft_workers() -> int:
    """Thread count for tangential transforms, capped by ``LELAB_THREADS``."""
    value = os.environ.get("LELAB_THREADS")
    if not value:
        return 1
    return max(1, int(value))


def cheb_matrix(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes cos(pi j / (n-1)) and the d/dxi matrix."""
    N = n - 1
    j = np.arange(n)
    xi = np.cos(np.pi * j / N)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dx = xi[:, None] - xi[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return xi, D


def clenshaw_curtis(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on [-1, 1] at the n Lobatto nodes."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(N - 1)
    interior = theta[1:-1]
    if N % 2 == 0:
        w[0] = w[-1] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k * k - 1)
        v -= np.cos(N * interior) / (N**2 - 1)
    else:
        w[0] = w[-1] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / N
    return w


def barycentric_matrix(nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Matrix evaluating the Lobatto interpolant at arbitrary points.

    ``nodes`` must be Chebyshev-Lobatto points (any affine image); the
    returned array has shape ``targets.shape + (len(nodes),)``.
    """
    n = len(nodes)
    wts = (-1.0) ** np.arange(n)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    t = np.asarray(targets, dtype=float)[..., None]
    diff = t - nodes
    exact = diff == 0.0
    diff = np.where(exact, 1.0, diff)
    terms = wts / diff
    P = terms / terms.sum(axis=-1, keepdims=True)
    hit = exact.any(axis=-1)
    if hit.any():
        P[hit] = exact[hit].astype(float)
    return P


@dataclass(frozen=True)
class Grid:
    """Collocation grid with n1 x n2 Fourier modes and n3 vertical nodes."""

    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        for name in ("n1", "n2"):
            n = getattr(self, name)
            if n <= 0 or n % 2:
                raise ValueError(f"{name} must be a positive even integer, got {n}")
        if self.n3 < 5:
            raise ValueError(f"n3 must be at least 5, got {self.n3}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def periods(self) -> tuple[float, float]:
        return (2 * np.pi, 2 * np.pi)

    @property
    def area(self) -> float:
        return 4 * np.pi**2

    @cached_property
    def x1(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n1) / self.n1

    @cached_property
    def x2(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n2) / self.n2

    @cached_property
    def x3(self) -> np.ndarray:
        xi, _ = cheb_matrix(self.n3)
        return (1.0 - xi) / 2.0

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.x1, self.x2, self.x3, indexing="ij"))

    @cached_property
    def d3_matrix(self) -> np.ndarray:
        _, D = cheb_matrix(self.n3)
        return -2.0 * D

    @cached_property
    def weights3(self) -> np.ndarray:
        return clenshaw_curtis(self.n3) / 2.0

    # wavenumbers of the rfft2 layout (n1, n2 // 2 + 1)
    @cached_property
    def k1(self) -> np.ndarray:
        return np.fft.fftfreq(self.n1, 1.0 / self.n1)[:, None]

    @cached_property
    def k2(self) -> np.ndarray:
        return np.fft.rfftfreq(self.n2, 1.0 / self.n2)[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def nyquist(self) -> np.ndarray:
        """Mask of modes carrying a Nyquist wavenumber in either direction."""
        return (np.abs(self.k1) == self.n1 // 2) | (self.k2 == self.n2 // 2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return (np.abs(self.k1) < self.n1 / 3) & (self.k2 < self.n2 / 3)

    def multiplier(self, axis: int) -> np.ndarray:
        """Symbol i*k of d/dx_axis, zero on the Nyquist mode of that axis."""
        if axis == 1:
            k = np.where(np.abs(self.k1) == self.n1 // 2, 0.0, self.k1)
        elif axis == 2:
            k = np.where(self.k2 == self.n2 // 2, 0.0, self.k2)
        else:
            raise ValueError(f"tangential axis must be 1 or 2, got {axis}")
        return 1j * k

    # transforms act on the trailing three axes
    def forward(self, values: np.ndarray) -> np.ndarray:
        return scipy.fft.rfft2(values, axes=_TANGENTIAL_AXES, norm="forward",
                               workers=fft_workers())

    def backward(self, coeffs: np.ndarray) -> np.ndarray:
        return scipy.fft.irfft2(coeffs, s=(self.n1, self.n2), axes=_TANGENTIAL_AXES,
                                norm="forward", workers=fft_workers())

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Parseval multiplicity of each rfft column (conjugate pairs count twice)."""
        w = np.full(self.n2 // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.broadcast_to(w[None, :], (self.n1, self.n2 // 2 + 1))

    def l2_sq_coeffs(self, coeffs: np.ndarray) -> float:
        """Squared L^2 norm over the slab from rfft coefficients (all stacked axes summed)."""
        planar = (np.abs(coeffs) ** 2 * self.rfft_weights[..., None]).sum(axis=(-3, -2))
        return float((planar @ self.weights3).sum() * self.area)

    def d_spectral(self, coeffs: np.ndarray, axis: int) -> np.ndarray:
        """Derivative of rfft coefficients without leaving spectral space."""
        if axis == 3:
            return coeffs @ self.d3_matrix.T
        return coeffs * self.multiplier(axis)[..., None]

    def apply_symbol(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        """Multiply by a tangential Fourier symbol of shape (n1, n2//2+1)."""
        return self.backward(self.forward(values) * symbol[..., None])

    def d(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Derivative of a stacked array along x1, x2 (spectral) or x3 (collocation)."""
        if axis == 3:
            return values @ self.d3_matrix.T
        return self.apply_symbol(values, self.multiplier(axis))

    def dealias(self, values: np.ndarray) -> np.ndarray:
        return self.apply_symbol(values, self.dealias_mask.astype(float))

    def integrate_array(self, values: np.ndarray) -> np.ndarray:
        """Integral over the slab of each stacked scalar."""
        planar = values.mean(axis=(-3, -2)) * self.area
        return planar @ self.weights3

    def zeros(self) -> ScalarField:
        return ScalarField(self, np.zeros(self.shape))

    def coordinate(self, axis: int) -> ScalarField:
        """Coordinate function x_axis; x1, x2 are not periodic, use with care."""
        return ScalarField(self, np.array(self.mesh[axis - 1]))


def _as_array(grid: Grid, other) -> np.ndarray | float:
    if isinstance(other, (ScalarField, VectorField, TensorField)):
        if other.grid != grid:
            raise ValueError("fields live on different grids")
        return other.values
    return other


class _FieldArithmetic:
    """Shared elementwise arithmetic; products of fields are dealiased."""

    grid: Grid
    values: np.ndarray

    def _new(self, values):
        return type(self)(self.grid, values)

    def __add__(self, other):
        return self._new(self.values + _as_array(self.grid, other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.values - _as_array(self.grid, other))

    def __rsub__(self, other):
        return self._new(_as_array(self.grid, other) - self.values)

    def __neg__(self):
        return self._new(-self.values)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self._new(self.values * other)
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return self._new(self.grid.dealias(self.values * other.values))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self._new(self.values / other)
        return NotImplemented


@dataclass(frozen=True, eq=False)
class ScalarField(_FieldArithmetic):
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, func) -> ScalarField:
        x1, x2, x3 = grid.mesh
        return cls(grid, np.broadcast_to(func(x1, x2, x3), grid.shape).copy())

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs: np.ndarray) -> ScalarField:
        return cls(grid, grid.backward(coeffs))

    @property
    def coeffs(self) -> np.ndarray:
        """Tangential rfft coefficients, shape (n1, n2//2+1, n3)."""
        return self.grid.forward(self.values)

    def full_spectrum(self) -> np.ndarray:
        return scipy.fft.fft2(self.values, axes=(0, 1), norm="forward")

    def l2(self) -> float:
        return float(np.sqrt(self.grid.integrate_array(self.values**2)))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


@dataclass(frozen=True, eq=False)
class VectorField(_FieldArithmetic):
    """Three components on one grid, stored as a (3, n1, n2, n3) array."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (3,) + self.grid.shape:
            raise ValueError(f"expected shape {(3,) + self.grid.shape}, got {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_components(cls, components) -> VectorField:
        components = list(components)
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise ValueError("all components must share one grid")
        return cls(grid, np.stack([c.values for c in components]))

    @classmethod
    def zeros(cls, grid: Grid) -> VectorField:
        return cls(grid, np.zeros((3,) + grid.shape))

    def __getitem__(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])

    def __iter__(self):
        return (self[i] for i in range(3))

    def __len__(self):
        return 3

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return VectorField(self.grid, self.grid.dealias(self.values * other.values))
        return super().__mul__(other)

    __rmul__ = __mul__

    def l2(self) -> float:
        return float(np.sqrt(self.grid.integrate_array(self.values**2).sum()))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


@dataclass(frozen=True, eq=False)
class TensorField(_FieldArithmetic):
    """3x3 matrix field with entries values[i, j]; stored as (3, 3, n1, n2, n3)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (3, 3) + self.grid.shape:
            raise ValueError(f"expected shape {(3, 3) + self.grid.shape}, got {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def identity(cls, grid: Grid) -> TensorField:
        eye = np.zeros((3, 3) + grid.shape)
        for i in range(3):
            eye[i, i] = 1.0
        return cls(grid, eye)

    def __getitem__(self, ij: tuple[int, int]) -> ScalarField:
        i, j = ij
        return ScalarField(self.grid, self.values[i, j])

    def transpose(self) -> TensorField:
        return TensorField(self.grid, np.swapaxes(self.values, 0, 1))

    T = property(transpose)

    def matmul(self, other: TensorField) -> TensorField:
        prod = np.einsum("ik...,kj...->ij...", self.values, other.values)
        return TensorField(self.grid, self.grid.dealias(prod))

    __matmul__ = matmul

    def l2(self) -> float:
        return float(np.sqrt(self.grid.integrate_array(self.values**2).sum()))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    grid: Grid
    which: Plane
    values: np.ndarray

    def __post_init__(self):
        if self.which not in (BOTTOM, TOP):
            raise ValueError(f"unknown plane {self.which!r}")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n1, self.grid.n2):
            raise ValueError("trace must have shape (n1, n2)")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid, which: Plane) -> BoundaryTrace:
        return cls(grid, which, np.zeros((grid.n1, grid.n2)))

    def integrate(self) -> float:
        return float(self.values.mean() * self.grid.area)


def tangential_derivative(f: ScalarField, axis: int) -> ScalarField:
    return ScalarField(f.grid, f.grid.d(f.values, axis))


def vertical_derivative(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.d(f.values, 3))


def derivative(f: ScalarField, axis: int) -> ScalarField:
    return ScalarField(f.grid, f.grid.d(f.values, axis))


def restrict(f: ScalarField, which: Plane) -> BoundaryTrace:
    index = 0 if which == BOTTOM else -1
    return BoundaryTrace(f.grid, which, f.values[..., index])


def integrate(f: ScalarField) -> float:
    return float(f.grid.integrate_array(f.values))


def gradient_array(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Stack of d/dx1, d/dx2, d/dx3 on a new leading axis."""
    coeffs = grid.forward(values)
    d1, d2 = grid.backward(np.stack([grid.d_spectral(coeffs, 1), grid.d_spectral(coeffs, 2)]))
    return np.stack([d1, d2, grid.d(values, 3)])


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, gradient_array(f.grid, f.values))


def jacobian(u: VectorField) -> TensorField:
    """Matrix with entries d_j u_i (row = component, column = derivative)."""
    return TensorField(u.grid, np.swapaxes(gradient_array(u.grid, u.values), 0, 1))


def divergence(u: VectorField) -> ScalarField:
    g = u.grid
    return ScalarField(g, sum(g.d(u.values[i], i + 1) for i in range(3)))


def curl_array(grid: Grid, u: np.ndarray) -> np.ndarray:
    d = grid.d
    return np.stack([
        d(u[2], 2) - d(u[1], 3),
        d(u[0], 3) - d(u[2], 1),
        d(u[1], 1) - d(u[0], 2),
    ])


def curl(u: VectorField) -> VectorField:
    return VectorField(u.grid, curl_array(u.grid, u.values))
