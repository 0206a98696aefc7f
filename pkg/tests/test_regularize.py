import numpy as np
import pytest
from scipy.integrate import quad

from lelab.grid import Grid, VectorField, barycentric_matrix, curl, divergence
from lelab.presets import generic, random_vector
from lelab.regularize import (
    ShiftedDatum,
    bump,
    divergence_correction,
    mollifier_table,
    mollify,
    multiplier,
    regularize_datum,
    shift_rescale,
)
from lelab.sobolev import aniso_norm

SWEEP = (0.2, 0.1, 0.05, 0.025)


@pytest.fixture(scope="module")
def tall_grid():
    return Grid(16, 16, 33)


def radial_transform(k, r):
    """Normalized 3-D transform of the radial bump at |xi| = k, by direct quadrature."""
    mass = quad(lambda p: bump(p**2 / r**2) * p**2, 0, r, epsabs=1e-15, epsrel=1e-13)[0]
    if k == 0:
        return 1.0
    val = quad(lambda p: bump(p**2 / r**2) * np.sinc(k * p / np.pi) * p**2, 0, r,
               epsabs=1e-15, epsrel=1e-13)[0]
    return val / mass


def sample_vertical(grid, values, heights):
    return values @ barycentric_matrix(grid.x3, heights).T


class TestShiftRescale:
    def test_radius_validation(self, grid):
        with pytest.raises(ValueError):
            shift_rescale(generic(grid), 0.0)
        with pytest.raises(ValueError):
            shift_rescale(generic(grid), 1.5)

    def test_constant_horizontal_field(self, grid):
        v = np.zeros((3,) + grid.shape)
        v[0] = 2.5
        out = shift_rescale(VectorField(grid, v), 0.1).field.values
        np.testing.assert_allclose(out, v, atol=1e-14)

    def test_third_component_scaling(self, grid):
        v = np.zeros((3,) + grid.shape)
        v[2] = 1.0
        out = shift_rescale(VectorField(grid, v), 0.25).field.values
        np.testing.assert_allclose(out[2], 1.0 / 1.5, atol=1e-14)

    def test_small_radius_limit(self, tall_grid):
        v0 = generic(tall_grid)
        errs = [(shift_rescale(v0, r).field - v0).l2() for r in (0.1, 0.05, 0.025)]
        assert errs[0] > errs[1] > errs[2]

    @pytest.mark.parametrize("kind", ["generic", "random"])
    def test_curl_structure(self, tall_grid, rng, kind):
        """curl of the shifted datum is (w1 / (1 + 2r), w2 / (1 + 2r), w3) at the source height."""
        v0 = generic(tall_grid) if kind == "generic" else random_vector(tall_grid, rng)
        omega = curl(v0).values
        for r in SWEEP:
            lam = 1.0 / (1.0 + 2.0 * r)
            shifted = shift_rescale(v0, r)
            lhs = curl(shifted.field).values
            at_source = sample_vertical(tall_grid, omega, shifted.source_height(tall_grid.x3))
            rhs = at_source * np.array([lam, lam, 1.0])[:, None, None, None]
            assert np.abs(lhs - rhs).max() <= 1e-10

    def test_uniform_scaling_misses_vertical_component(self, tall_grid, rng):
        v0 = random_vector(tall_grid, rng)
        r = 0.1
        shifted = shift_rescale(v0, r)
        lhs = curl(shifted.field).values
        at_source = sample_vertical(tall_grid, curl(v0).values,
                                    shifted.source_height(tall_grid.x3))
        uniform = at_source / (1 + 2 * r)
        assert np.abs(lhs[:2] - uniform[:2]).max() <= 1e-10
        assert np.abs(lhs[2] - uniform[2]).max() > 1e-3


class TestMollifier:
    def test_bump_support(self):
        assert bump(np.array([1.0, 2.0])).tolist() == [0.0, 0.0]
        assert bump(np.array([0.0]))[0] == pytest.approx(np.exp(-1))

    @pytest.mark.parametrize("r", [0.2, 0.05])
    def test_multiplier_matches_radial_quadrature(self, grid, r):
        m = multiplier(grid, r)
        assert m[0, 0] == pytest.approx(1.0, abs=1e-13)
        for k1, k2 in [(1, 0), (0, 3), (2, 2), (5, 4)]:
            k = np.hypot(k1, k2)
            assert m[k1, k2] == pytest.approx(radial_transform(k, r), abs=1e-10)

    def test_multiplier_range(self, grid):
        m = multiplier(grid, 0.2)
        assert np.all(m > 0) and np.all(m <= 1 + 1e-14)

    def test_table_is_normalized(self, grid):
        _, wy, table = mollifier_table(grid, 0.1)
        assert wy @ table[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_constant_is_preserved(self, grid):
        v = VectorField(grid, np.ones((3,) + grid.shape) * np.array([1.0, -2.0, 0.5])[:, None, None, None])
        np.testing.assert_allclose(mollify(v, 0.1).values, v.values, atol=1e-13)

    def test_single_mode(self, grid):
        x1 = grid.mesh[0]
        v = np.zeros((3,) + grid.shape)
        v[1] = np.cos(3 * x1)
        out = mollify(VectorField(grid, v), 0.2).values
        np.testing.assert_allclose(out[1], multiplier(grid, 0.2)[3, 0] * v[1], atol=1e-13)

    def test_smoothing_trend(self, grid):
        v0 = generic(grid)
        base = aniso_norm(v0, 2.75)
        scaled = [aniso_norm(mollify(shift_rescale(v0, r), r), 4.0) * r**1.5 / base
                  for r in SWEEP]
        assert all(np.isfinite(scaled)) and max(scaled) < 10


class TestDivergenceCorrection:
    def test_compatible_field_untouched(self, grid):
        w = generic(grid)
        out, h = divergence_correction(w)
        assert h.max_abs() <= 1e-12
        assert np.abs(out.values - w.values).max() <= 1e-12

    def test_pure_gradient_is_removed(self, grid):
        x1, x2, x3 = grid.mesh
        c = np.cos(x1 + 2 * x2)
        phi_1 = -np.sin(x1 + 2 * x2) * (1 - x3) * x3**2
        w = np.stack([phi_1, 2 * phi_1, c * (2 * x3 - 3 * x3**2)])
        out, h = divergence_correction(VectorField(grid, w))
        assert out.max_abs() <= 1e-10
        np.testing.assert_allclose(h.values, c * (1 - x3) * x3**2, atol=1e-10)

    def test_random_field(self, grid, rng):
        w = random_vector(grid, rng)
        out, _ = divergence_correction(w)
        assert divergence(out).l2() <= 1e-10
        assert np.abs(out.values[2, ..., 0]).max() <= 1e-10
        assert np.abs(curl(out).values - curl(w).values).max() <= 1e-12 * curl(w).max_abs()


class TestRegularizeDatum:
    def test_rest(self, grid):
        res = regularize_datum(VectorField.zeros(grid), 0.1)
        assert res.v0r.max_abs() == 0.0 and res.datum_error == 0.0

    def test_sweep(self, grid):
        v0 = generic(grid)
        results = [regularize_datum(v0, r) for r in SWEEP]
        errors = [res.datum_error for res in results]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        for res in results:
            assert res.div_residual <= 1e-10 and res.bottom_residual <= 1e-10
            assert res.curl_ratio < 2.0
        assert isinstance(results[0].w, VectorField)

    def test_shifted_datum_accessors(self, grid):
        d = ShiftedDatum(generic(grid), 0.1)
        assert d.grid is grid
        assert d.source_height(np.array([-0.1, 1.1])).tolist() == pytest.approx([0.0, 1.0])
