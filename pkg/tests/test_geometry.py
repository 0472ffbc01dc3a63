import numpy as np
import pytest

from flowforge import (
    DegenerateDirection,
    Direction,
    GraphField,
    GridMismatch,
    PeriodicGrid,
    curvature,
    flow_rhs,
    gradient,
    hessian,
    normal_field,
    normal_vector,
    sup_dist,
)

from conftest import TWO_PI, loglog_slope, sine_field


class TestPeriodicGrid:
    def test_spacing_derived(self):
        g = PeriodicGrid((TWO_PI,), (256,))
        assert g.spacing == (TWO_PI / 256,)
        assert g.dim == 1
        assert g.shape == (256,)

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            PeriodicGrid((1.0, 1.0, 1.0), (8, 8, 8))
        with pytest.raises(ValueError):
            PeriodicGrid((1.0,), (4,))
        with pytest.raises(ValueError):
            PeriodicGrid((-1.0,), (16,))

    def test_hashable(self):
        assert hash(PeriodicGrid((1.0,), (8,))) == hash(PeriodicGrid((1.0,), (8,)))


class TestGraphField:
    def test_rejects_nan(self, grid256):
        vals = np.zeros(256)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            GraphField(grid256, vals)

    def test_rejects_shape_mismatch(self, grid256):
        with pytest.raises(ValueError):
            GraphField(grid256, np.zeros(255))

    def test_from_function(self, grid256):
        f = GraphField.from_function(grid256, np.sin)
        assert f.values.shape == (256,)
        assert f.values[0] == 0.0


class TestDirection:
    def test_unit_enforced(self):
        with pytest.raises(ValueError):
            Direction((0.0, 2.0))

    def test_upward_enforced(self):
        with pytest.raises(ValueError):
            Direction.of([0.0, -1.0])

    def test_normalizes(self):
        r = Direction.of([3.0, 4.0])
        assert np.allclose(r.vector, [0.6, 0.8])
        assert r.upward == pytest.approx(0.8)

    def test_vertical(self):
        assert Direction.vertical(2).components == (0.0, 0.0, 1.0)


class TestGradient:
    def test_constant_is_zero(self, grid256):
        f = GraphField(grid256, np.full(256, 4.2))
        assert np.all(gradient(f) == 0.0)

    def test_sine_matches_cosine(self, grid256):
        f = sine_field(grid256)
        h = grid256.spacing[0]
        err = np.max(np.abs(gradient(f)[0] - np.cos(grid256.axis(0))))
        assert err <= h * h

    def test_affine_sawtooth_interior_exact(self, grid2d):
        x, y = grid2d.coords()
        f = GraphField(grid2d, 0.7 * x + 0.2 * y)
        g = gradient(f)
        interior = (slice(1, -1), slice(1, -1))
        assert np.max(np.abs(g[0][interior] - 0.7)) < 1e-12
        assert np.max(np.abs(g[1][interior] - 0.2)) < 1e-12


class TestHessian:
    def test_constant_is_zero(self, grid256):
        f = GraphField(grid256, np.full(256, -1.0))
        assert np.all(hessian(f) == 0.0)

    def test_sine_second_derivative(self, grid256):
        f = sine_field(grid256)
        h = grid256.spacing[0]
        err = np.max(np.abs(hessian(f)[0, 0] + np.sin(grid256.axis(0))))
        assert err <= h * h

    def test_bilinear_cross_term(self, grid2d):
        x, y = grid2d.coords()
        f = GraphField(grid2d, x * y)
        hess = hessian(f)
        interior = (slice(1, -1), slice(1, -1))
        assert np.max(np.abs(hess[0, 1][interior] - 1.0)) < 1e-10
        assert np.array_equal(hess[0, 1], hess[1, 0])


def test_stencils_commute_with_index_shift(grid256):
    f = GraphField.from_function(grid256, lambda x: np.sin(x) + 0.3 * np.cos(2 * x))
    shifted = GraphField(grid256, np.roll(f.values, 11))
    assert np.array_equal(np.roll(gradient(f)[0], 11), gradient(shifted)[0])
    assert np.array_equal(np.roll(hessian(f)[0, 0], 11), hessian(shifted)[0, 0])
    assert np.array_equal(np.roll(curvature(f).values, 11), curvature(shifted).values)


@pytest.mark.parametrize("op,exact", [
    (lambda f: gradient(f)[0], lambda x: np.cos(x) - 0.6 * np.sin(2 * x)),
    (lambda f: hessian(f)[0, 0], lambda x: -np.sin(x) - 1.2 * np.cos(2 * x)),
])
def test_second_order_convergence(op, exact):
    errs, hs = [], []
    for n in (64, 128, 256):
        grid = PeriodicGrid((TWO_PI,), (n,))
        f = GraphField.from_function(grid, lambda x: np.sin(x) + 0.3 * np.cos(2 * x))
        errs.append(np.max(np.abs(op(f) - exact(grid.axis(0)))))
        hs.append(grid.spacing[0])
    assert loglog_slope(hs, errs) >= 1.8


class TestNormal:
    def test_flat_gives_vertical(self, grid256):
        f = GraphField(grid256, np.zeros(256))
        assert np.allclose(normal_vector(f, 0), [0.0, 1.0])

    def test_unit_slope(self, grid256):
        x = grid256.axis(0)
        f = GraphField(grid256, 1.0 * x)
        nu = normal_vector(f, 128)
        assert np.max(np.abs(nu - np.array([-1.0, 1.0]) / np.sqrt(2))) < 1e-12

    def test_slope_3_4(self, grid2d):
        x, y = grid2d.coords()
        f = GraphField(grid2d, 3.0 * x + 4.0 * y)
        nu = normal_vector(f, (32, 32))
        assert np.max(np.abs(nu - np.array([-3.0, -4.0, 1.0]) / np.sqrt(26))) < 1e-12

    def test_field_unit_and_upward(self, grid2d):
        f = GraphField.from_function(grid2d, lambda x, y: 0.4 * np.sin(x) * np.cos(y))
        nf = normal_field(f)
        norms = np.sqrt(np.sum(nf * nf, axis=0))
        assert np.max(np.abs(norms - 1.0)) < 1e-12
        assert np.min(nf[-1]) > 0.0


class TestCurvature:
    def test_flat_is_zero(self, grid256):
        assert np.all(curvature(GraphField(grid256, np.zeros(256))).values == 0.0)

    def test_small_amplitude_linearization(self, grid256):
        eps = 1e-3
        f = sine_field(grid256, amplitude=eps)
        h = grid256.spacing[0]
        err = np.max(np.abs(curvature(f).values + eps * np.sin(grid256.axis(0))))
        assert err <= 1e-6 + h * h

    def test_closed_form_at_crest(self, grid256):
        f = sine_field(grid256)
        h = grid256.spacing[0]
        # N divisible by 4, so x = pi/2 is a node with slope 0 and f'' = -1
        assert abs(curvature(f).values[64] + 1.0) <= 2 * h * h


class TestFlowRhs:
    def test_flat_is_zero(self, grid256, vertical):
        assert np.all(flow_rhs(GraphField(grid256, np.zeros(256)), vertical).values == 0.0)

    def test_d1_reduction_to_second_difference(self, grid256, vertical):
        f = sine_field(grid256, amplitude=0.8)
        rhs = flow_rhs(f, vertical).values
        second = hessian(f)[0, 0]
        scale = np.max(np.abs(second))
        assert np.max(np.abs(rhs - second)) <= 1e-12 * scale

    def test_identity_with_curvature(self, grid2d):
        f = GraphField.from_function(grid2d, lambda x, y: 0.5 * np.sin(x) * np.sin(y))
        rhs = flow_rhs(f, Direction.vertical(2)).values
        g = gradient(f)
        one_plus = 1.0 + np.sum(g * g, axis=0)
        lifted = one_plus ** 1.5 * curvature(f).values
        denom = np.max(np.abs(lifted))
        assert np.max(np.abs(rhs - lifted)) <= 1e-10 * denom

    def test_critical_point_value(self, grid2d):
        f = GraphField.from_function(grid2d, lambda x, y: 0.3 * np.sin(x) * np.sin(y))
        rhs = flow_rhs(f, Direction.vertical(2)).values
        assert abs(rhs[16, 16] + 0.6) <= 1e-3  # node at (pi/2, pi/2)

    def test_degenerate_direction_raises(self, grid256):
        x = grid256.axis(0)
        f = GraphField(grid256, 1.2 * x)  # slope above the tangency threshold
        with pytest.raises(DegenerateDirection):
            flow_rhs(f, Direction.of([1.0, 1.0]))


class TestSupDist:
    def test_zero_for_equal(self, grid256):
        f = sine_field(grid256)
        assert sup_dist(f, f) == 0.0

    def test_constant_shift(self, grid256):
        f = sine_field(grid256)
        assert sup_dist(f, f.shifted(-2.5)) == 2.5

    def test_sine_peak_hit(self, grid256):
        f = sine_field(grid256)
        zero = GraphField(grid256, np.zeros(256))
        assert sup_dist(f, zero) == 1.0

    def test_grid_mismatch(self, grid256):
        other = PeriodicGrid((TWO_PI,), (128,))
        with pytest.raises(GridMismatch):
            sup_dist(sine_field(grid256), sine_field(other))
