"""Built-in initial data (rest, the steady shear oracle, a smooth generic flow)
and random band-limited test fields."""
from __future__ import annotations

import numpy as np

from .grid import Grid, VectorField

PRESETS = ("rest", "shear", "generic")


def rest(grid: Grid) -> VectorField:
    return VectorField.zeros(grid)


def shear_profile(x3):
    return np.sin(np.pi * x3 / 2)


def shear(grid: Grid) -> VectorField:
    """v = (sin(pi x3 / 2), 0, 0): an exact steady solution with q = 0."""
    x3 = grid.mesh[2]
    v = np.zeros((3,) + grid.shape)
    v[0] = shear_profile(x3)
    return VectorField(grid, v)


def generic(grid: Grid, potential=0.2, vortical=0.1) -> VectorField:
    """Divergence-free flow with v3 = 0 on the bottom.

    A potential part grad(cos x1 cosh x3) plus the curl of
    x3^2 (sin x2, sin x1, 0), both analytic in x3.
    """
    x1, x2, x3 = grid.mesh
    v = np.stack([
        -potential * np.sin(x1) * np.cosh(x3),
        np.zeros_like(x1),
        potential * np.cos(x1) * np.sinh(x3),
    ])
    v += vortical * np.stack([
        -2 * np.sin(x1) * x3,
        2 * np.sin(x2) * x3,
        (np.cos(x1) - np.cos(x2)) * x3**2,
    ])
    return VectorField(grid, v)


def perturbation(grid: Grid) -> VectorField:
    """Divergence-free direction for twin runs: curl of (0, 0, cos(x1 - x2) e^x3 / 2)."""
    x1, x2, x3 = grid.mesh
    profile = 0.5 * np.sin(x1 - x2) * np.exp(x3)
    return VectorField(grid, np.stack([profile, profile, np.zeros_like(x1)]))


def random_scalar(grid: Grid, rng: np.random.Generator, modes: int = 3,
                  degree: int = 4) -> np.ndarray:
    """Band-limited array: tangential modes |k_i| <= ``modes`` times a random
    polynomial of degree ``degree`` in x3, with O(1) amplitudes."""
    x1, x2, x3 = grid.mesh
    out = np.zeros(grid.shape)
    for k1 in range(-modes, modes + 1):
        for k2 in range(0, modes + 1):
            if k2 == 0 and k1 < 0:
                continue
            phase = k1 * x1 + k2 * x2
            profile = np.polynomial.polynomial.polyval(x3, rng.normal(size=degree + 1))
            weight = 1.0 / (1.0 + k1 * k1 + k2 * k2)
            out += weight * profile * (np.cos(phase) if rng.random() < 0.5 else np.sin(phase))
    return out


def random_vector(grid: Grid, rng: np.random.Generator, modes: int = 3,
                  degree: int = 4) -> VectorField:
    return VectorField(grid, np.stack([random_scalar(grid, rng, modes, degree)
                                       for _ in range(3)]))


def harmonic_gradient(grid: Grid, rng: np.random.Generator, modes: int = 2) -> VectorField:
    """grad phi for a random harmonic phi = sum cos/sin(k.x)(c cosh|k|x3 + s sinh|k|x3),
    plus a random constant vector; divergence and curl vanish."""
    x1, x2, x3 = grid.mesh
    v = np.zeros((3,) + grid.shape)
    v += rng.normal(size=3)[:, None, None, None]
    for k1 in range(-modes, modes + 1):
        for k2 in range(0, modes + 1):
            if (k2 == 0 and k1 <= 0):
                continue
            kk = np.hypot(k1, k2)
            c, s = rng.normal(size=2) / kk**2
            prof, dprof = (c * np.cosh(kk * x3) + s * np.sinh(kk * x3),
                           kk * (c * np.sinh(kk * x3) + s * np.cosh(kk * x3)))
            phase = k1 * x1 + k2 * x2
            if rng.random() < 0.5:
                v += np.stack([-k1 * np.sin(phase) * prof, -k2 * np.sin(phase) * prof,
                               np.cos(phase) * dprof])
            else:
                v += np.stack([k1 * np.cos(phase) * prof, k2 * np.cos(phase) * prof,
                               np.sin(phase) * dprof])
    return VectorField(grid, v)


def divcurl_sample(grid: Grid, rng: np.random.Generator) -> VectorField:
    """Random band-limited field with a generic part and a harmonic-gradient part.

    Purely generic fields keep the curl and divergence terms large, so the
    harmonic part is what probes the L^2 and boundary terms of the inequality.
    """
    return random_vector(grid, rng) * float(rng.random()) + harmonic_gradient(grid, rng)


def build(name: str, grid: Grid) -> VectorField:
    if name == "rest":
        return rest(grid)
    if name == "shear":
        return shear(grid)
    if name == "generic":
        return generic(grid)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
