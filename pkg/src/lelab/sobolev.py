"""Anisotropic Sobolev norms, tangential multipliers and difference quotients.

The slab norm used throughout is

    N_s(f)^2 = sum_{j=0}^{floor(s)} || Lambda^{s-j} d3^j f ||_{L^2}^2,

with Lambda = (I - Delta_2)^{1/2} acting in the periodic directions only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .grid import Grid, ScalarField, VectorField, curl_array


class ResolutionError(ValueError):
    """Requested vertical derivative order is not resolvable on the grid."""


def _values(f) -> np.ndarray:
    return f.values


def _rebuild(f, values):
    return type(f)(f.grid, values)


def lambda_symbol(grid: Grid, sigma: float) -> np.ndarray:
    return (1.0 + grid.ksq) ** (sigma / 2.0)


def lambda_power(f, sigma: float):
    """Apply Lambda^sigma = (1 + k1^2 + k2^2)^(sigma/2) mode by mode."""
    if sigma == 0:
        return f
    return _rebuild(f, f.grid.apply_symbol(_values(f), lambda_symbol(f.grid, sigma)))


def norm_sq_coeffs(grid: Grid, coeffs: np.ndarray, s: float) -> float:
    """N_s^2 from rfft coefficients, summed over any leading component axes."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    top = math.floor(s)
    if top > grid.n3 - 2:
        raise ResolutionError(
            f"index {s} needs {top} vertical derivatives but n3={grid.n3} resolves {grid.n3 - 2}")
    total = 0.0
    for j in range(top + 1):
        if j:
            coeffs = coeffs @ grid.d3_matrix.T
        total += grid.l2_sq_coeffs(coeffs * lambda_symbol(grid, s - j)[..., None])
    return total


def _norm_sq_array(grid: Grid, values: np.ndarray, s: float) -> float:
    return norm_sq_coeffs(grid, grid.forward(values), s)


def aniso_norm(f, s: float) -> float:
    """N_s of a scalar, vector or tensor field (components summed in l^2)."""
    return math.sqrt(_norm_sq_array(f.grid, _values(f), s))


def aniso_norm_array(grid: Grid, values: np.ndarray, s: float) -> float:
    return math.sqrt(_norm_sq_array(grid, values, s))


def smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity transition from 0 (t <= 0) to 1 (t >= 1) built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)

    def e(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    a, b = e(t), e(1.0 - t)
    return a / (a + b)


@dataclass(frozen=True, eq=False)
class CutoffPair:
    """Vertical cutoffs with psi <= chi, chi = 1 on a neighbourhood of supp psi.

    chi rises on [chi_lo, chi_lo + chi_width], psi on [psi_lo, psi_lo + psi_width].
    """

    chi: ScalarField
    psi: ScalarField
    chi_lo: float = 0.6
    chi_width: float = 0.1
    psi_lo: float = 0.8
    psi_width: float = 0.05

    @classmethod
    def build(cls, grid: Grid, chi_lo=0.6, chi_width=0.1, psi_lo=0.8, psi_width=0.05):
        if not (0 < chi_lo and chi_lo + chi_width <= psi_lo and psi_lo + psi_width < 1):
            raise ValueError("cutoff heights must satisfy 0 < chi_lo < chi_lo+width <= psi_lo < 1")
        x3 = grid.mesh[2]
        chi = ScalarField(grid, smoothstep((x3 - chi_lo) / chi_width))
        psi = ScalarField(grid, smoothstep((x3 - psi_lo) / psi_width))
        return cls(chi, psi, chi_lo, chi_width, psi_lo, psi_width)

    def get(self, name: str) -> ScalarField:
        if name not in ("chi", "psi"):
            raise ValueError(f"unknown cutoff {name!r}")
        return getattr(self, name)


def localized_norm(f, cutoff: ScalarField, s: float) -> float:
    """N_s(cutoff * f) with the product dealiased tangentially."""
    grid = f.grid
    prod = grid.dealias(_values(f) * cutoff.values)
    return aniso_norm_array(grid, prod, s)


@dataclass(frozen=True)
class QuotientSpec:
    direction: int
    h: float

    def __post_init__(self):
        if self.direction not in (1, 2):
            raise ValueError("difference quotients are tangential: direction must be 1 or 2")
        if not self.h > 0:
            raise ValueError(f"increment must be positive, got {self.h}")


def shift_symbol(grid: Grid, q: QuotientSpec) -> np.ndarray:
    if q.direction == 1:
        k, nyq = grid.k1, np.abs(grid.k1) == grid.n1 // 2
    else:
        k, nyq = grid.k2, grid.k2 == grid.n2 // 2
    phase = np.exp(1j * k * q.h)
    # the Nyquist mode of a real field is a cosine; keep it real
    phase = np.where(nyq, np.cos(k * q.h), phase)
    return np.broadcast_to(phase, grid.ksq.shape)


def shift(f, q: QuotientSpec):
    """Translation f(x + h e_l), exact for band-limited fields."""
    return _rebuild(f, f.grid.apply_symbol(_values(f), shift_symbol(f.grid, q)))


def diff_quotient(f, q: QuotientSpec):
    """(f(x + h e_l) - f(x)) / h."""
    symbol = (shift_symbol(f.grid, q) - 1.0) / q.h
    return _rebuild(f, f.grid.apply_symbol(_values(f), symbol))


@dataclass(frozen=True)
class DivCurlTerms:
    lhs: float
    l2: float
    curl: float
    div: float
    boundary: float

    @property
    def rhs_sum(self) -> float:
        return self.l2 + self.curl + self.div + self.boundary

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs_sum if self.rhs_sum > 0 else 0.0


def trace_gradient_norm(f: VectorField, sigma: float) -> float:
    """Tangential H^sigma norm of grad_2 f on the union of both planes."""
    grid = f.grid
    symbol = lambda_symbol(grid, sigma)
    total = 0.0
    for index in (0, -1):
        trace = f.values[..., index]
        coeffs = scipy.fft.rfft2(trace, axes=(-2, -1), norm="forward")
        for axis in (1, 2):
            g = scipy.fft.irfft2(coeffs * grid.multiplier(axis) * symbol, s=(grid.n1, grid.n2),
                              axes=(-2, -1), norm="forward")
            total += float((g**2).mean(axis=(-2, -1)).sum() * grid.area)
    return math.sqrt(total)


def div_curl_decomposition(f: VectorField, s: float) -> DivCurlTerms:
    """Left side N_s(f) and the four right-hand terms of the div-curl inequality."""
    if s < 1:
        raise ValueError(f"div-curl decomposition needs s >= 1, got {s}")
    grid = f.grid
    div = sum(grid.d(f.values[i], i + 1) for i in range(3))
    return DivCurlTerms(
        lhs=aniso_norm(f, s),
        l2=f.l2(),
        curl=aniso_norm_array(grid, curl_array(grid, f.values), s - 1),
        div=aniso_norm_array(grid, div, s - 1),
        boundary=trace_gradient_norm(f, s - 1.5),
    )


def fit_divcurl_constant(terms: list[DivCurlTerms]) -> float:
    """Smallest C with lhs <= C * rhs_sum over the sample."""
    return max(t.ratio for t in terms)

