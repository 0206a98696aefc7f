"""State builders shared by the unit tests and the acceptance suite."""
import numpy as np

from lelab.grid import ScalarField, VectorField, curl
from lelab.lagrangian import LagrangianState
from lelab.presets import generic, random_scalar


def volume_preserving_map(grid, rng):
    """Displacement of y -> (y1, y2 + g(y1, y3), y3) after x -> (x1 + f(x2, x3), x2, x3)."""
    x1, x2, x3 = grid.mesh
    a, b = rng.uniform(0.05, 0.1, size=2)
    k, m = rng.integers(1, 3, size=2)
    c = rng.uniform(-1, 1, size=3)
    # small amplitudes keep the composed spectrum inside the dealiasing band
    f = a * np.sin(k * x2 + 3 * c[0]) * (1 + c[1] * x3**2)
    y1 = x1 + f
    g = b * np.cos(m * y1 + c[2]) * np.sin(x3)
    return VectorField(grid, np.stack([f, g, np.zeros_like(f)]))


def perturbed_state(grid, eps):
    """Generic velocity on a map with max |I - a a^T| close to 2 eps."""
    x1, x2, x3 = grid.mesh
    disp = eps * np.stack([np.sin(x2) * x3**2, np.cos(x1) * x3**2, 0 * x1])
    v = generic(grid)
    return LagrangianState(0.0, VectorField(grid, disp), v, curl(v))


def sloshed_state(grid, rng, slope=1.0):
    """Deformed state with a pressure whose top normal derivative is negative."""
    x3 = grid.mesh[2]
    disp = VectorField(grid, 0.02 * np.stack([random_scalar(grid, rng, modes=2) for _ in range(3)]))
    v = VectorField(grid, np.stack([random_scalar(grid, rng, modes=2) for _ in range(3)]))
    q = slope * (1 - x3) + 0.05 * slope * random_scalar(grid, rng, modes=2, degree=2) * x3 * (1 - x3)
    return LagrangianState(t=0.3, displacement=disp, v=v, omega0=VectorField.zeros(grid),
                           q=ScalarField(grid, q))


# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_RESULTS: list[str] = []
