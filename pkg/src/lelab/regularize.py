"""Smoothing of an initial velocity: vertical shift/rescale, mollification,
and a gradient correction restoring incompressibility and v3 = 0 on the bottom.

The shifted datum samples the original field at (x3 + r) / (1 + 2r), so on
the enlarged interval [-r, 1 + r] it only ever reads the datum inside
[0, 1]; mollification of a shifted datum therefore needs no extension.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import j0, roots_legendre

from .elliptic import solve_modes
from .grid import Grid, ScalarField, VectorField, barycentric_matrix, curl, divergence
from .sobolev import CutoffPair, aniso_norm, localized_norm

N_VERTICAL_QUAD = 64
N_RADIAL_QUAD = 64


def bump(u: np.ndarray) -> np.ndarray:
    """exp(-1 / (1 - u)) for u = |x|^2 / r^2 < 1, zero elsewhere."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = u < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside]))
    return out


@dataclass(frozen=True, eq=False)
class ShiftedDatum:
    """The datum sampled at (x3 + r)/(1 + 2r), third component scaled by 1/(1 + 2r)."""

    source: VectorField
    r: float

    @property
    def grid(self) -> Grid:
        return self.source.grid

    @property
    def scale(self) -> np.ndarray:
        return np.array([1.0, 1.0, 1.0 / (1.0 + 2.0 * self.r)])

    def source_height(self, x3: np.ndarray) -> np.ndarray:
        return (np.asarray(x3) + self.r) / (1.0 + 2.0 * self.r)

    def sample_coeffs(self, x3: np.ndarray) -> np.ndarray:
        """rfft coefficients at arbitrary heights in [-r, 1 + r]; shape (3, n1, m2) + x3.shape."""
        P = barycentric_matrix(self.grid.x3, self.source_height(x3))
        coeffs = self.grid.forward(self.source.values)
        out = np.tensordot(coeffs, P, axes=([-1], [-1]))
        return out * self.scale.reshape((3,) + (1,) * (out.ndim - 1))

    @property
    def field(self) -> VectorField:
        return VectorField(self.grid, self.grid.backward(self.sample_coeffs(self.grid.x3)))


def shift_rescale(v0: VectorField, r: float) -> ShiftedDatum:
    _check_radius(r)
    return ShiftedDatum(v0, r)


def _check_radius(r: float):
    if not 0 < r <= 1:
        raise ValueError(f"mollification radius must lie in (0, 1], got {r}")


def _reflected_sampler(f: VectorField):
    """Even reflection across both planes for fields without a natural extension."""
    grid = f.grid
    coeffs = grid.forward(f.values)

    def sample(x3):
        x3 = np.asarray(x3, dtype=float)
        folded = np.where(x3 < 0, -x3, np.where(x3 > 1, 2.0 - x3, x3))
        return np.tensordot(coeffs, barycentric_matrix(grid.x3, folded), axes=([-1], [-1]))

    return sample


@lru_cache(maxsize=32)
def mollifier_table(grid: Grid, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertical nodes y, weights, and the partial transform m(|k|, y).

    m(|k|, y) integrates the normalized bump over the horizontal disc at
    height y against exp(-i k.x'); shape (n1, n2//2+1, n_y).  Normalized so
    that sum_y w_y m(0, y) = 1.
    """
    y, wy = roots_legendre(N_VERTICAL_QUAD)
    y, wy = r * y, r * wy
    s, ws = roots_legendre(N_RADIAL_QUAD)
    s, ws = 0.5 * (s + 1.0), 0.5 * ws

    kabs, inverse = np.unique(np.sqrt(grid.ksq), return_inverse=True)
    rho_max = np.sqrt(np.maximum(r * r - y * y, 0.0))  # (ny,)
    rho = rho_max[:, None] * s[None, :]  # (ny, ns)
    weight = bump((rho**2 + y[:, None] ** 2) / r**2) * rho * rho_max[:, None] * ws
    # 2 pi int_0^rho_max bump J0(k rho) rho d rho
    table = 2 * np.pi * np.einsum("yr,kyr->ky", weight, j0(kabs[:, None, None] * rho[None]))
    table /= wy @ table[0]
    return y, wy, table[inverse.reshape(grid.ksq.shape)]


def multiplier(grid: Grid, r: float) -> np.ndarray:
    """Full Fourier transform of the mollifier at (k1, k2, 0) on the rfft layout."""
    _, wy, table = mollifier_table(grid, r)
    return table @ wy


def mollify(f: VectorField | ShiftedDatum, r: float) -> VectorField:
    """Convolution with the normalized radial bump of radius r, evaluated on the grid.

    Tangentially the kernel acts as an exact Fourier multiplier; vertically
    the convolution is a Gauss-Legendre quadrature over [-r, r] against the
    (extended) field.  A ShiftedDatum supplies its own exact extension;
    a plain field is reflected evenly across both planes.
    """
    _check_radius(r)
    grid = f.grid
    sample = f.sample_coeffs if isinstance(f, ShiftedDatum) else _reflected_sampler(f)
    y, wy, table = mollifier_table(grid, r)
    heights = grid.x3[:, None] - y[None, :]  # (n3, ny)
    samples = sample(heights)  # (3, n1, m2, n3, ny)
    coeffs = np.einsum("cabzy,aby,y->cabz", samples, table, wy, optimize=True)
    return VectorField(grid, grid.backward(coeffs))


def divergence_correction(w: VectorField) -> tuple[VectorField, ScalarField]:
    """Subtract grad h with lap h = div w, h = 0 on top, d3 h = w3 on the bottom."""
    grid = w.grid
    div = divergence(w).values
    h = solve_modes(grid, div, w.values[2, ..., 0], np.zeros((grid.n1, grid.n2)))
    grad_h = np.stack([grid.d(h, k) for k in (1, 2, 3)])
    return VectorField(grid, w.values - grad_h), ScalarField(grid, h)


@dataclass(frozen=True, eq=False)
class RegularizationResult:
    r: float
    v0r: VectorField
    hr: ScalarField
    w: VectorField
    datum_error: float
    curl_ratio: float
    div_residual: float
    bottom_residual: float


def regularize_datum(v0: VectorField, r: float, delta: float = 0.25,
                     cutoffs: CutoffPair | None = None) -> RegularizationResult:
    grid = v0.grid
    cutoffs = cutoffs or CutoffPair.build(grid)
    w = mollify(shift_rescale(v0, r), r)
    v0r, hr = divergence_correction(w)
    datum_error = aniso_norm(v0r - v0, 2.5 + delta)
    curl_new = localized_norm(curl(v0r), cutoffs.chi, 2 + delta)
    curl_old = localized_norm(curl(v0), cutoffs.chi, 2 + delta)
    return RegularizationResult(
        r=r,
        v0r=v0r,
        hr=hr,
        w=w,
        datum_error=datum_error,
        curl_ratio=curl_new / (1.0 + curl_old),
        div_residual=divergence(v0r).l2(),
        bottom_residual=float(np.abs(v0r.values[2, ..., 0]).max()),
    )
