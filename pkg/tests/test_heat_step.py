import numpy as np
import pytest

from flowforge import (
    DegenerateDirection,
    Direction,
    EmptyStencil,
    FieldProbe,
    GraphField,
    HeatStepParams,
    KernelResolutionWarning,
    MultipleRootsWarning,
    NoBracket,
    PeriodicGrid,
    apply_heat_step,
    density_weight,
    density_weight_field,
    effective_root_tol,
    eval_probe,
    hessian,
    normal_vector,
    solve_surface_point,
    sup_dist,
)
from flowforge import heat_step as hs
from flowforge.geometry import flow_parts

from conftest import TWO_PI, sine_field

T = 1e-3
PARAMS = HeatStepParams()


class TestParams:
    def test_defaults_valid(self):
        p = HeatStepParams()
        assert p.trunc_mult == 8.0 and p.root_tol is None

    @pytest.mark.parametrize("kwargs", [
        {"trunc_mult": 3.0},
        {"root_tol": 0.0},
        {"max_bisect": 0},
        {"bracket_margin": -1.0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            HeatStepParams(**kwargs)

    def test_effective_root_tol_scales_with_field(self, grid256):
        small = GraphField(grid256, np.zeros(256))
        big = GraphField(grid256, np.full(256, 7.0))
        assert effective_root_tol(small, PARAMS) == 1e-10
        assert effective_root_tol(big, PARAMS) == pytest.approx(7e-10)
        assert effective_root_tol(big, HeatStepParams(root_tol=1e-8)) == 1e-8


class TestDensityWeight:
    def test_vertical_direction_is_exactly_one(self, grid256, vertical):
        f = sine_field(grid256, amplitude=0.9)
        assert density_weight(f, vertical, (17,)) == 1.0
        assert np.all(density_weight_field(f, vertical) == 1.0)

    def test_flat_tilted_gives_cosine(self, grid256):
        theta = 0.4
        r = Direction((np.sin(theta), np.cos(theta)))
        f = GraphField(grid256, np.zeros(256))
        assert density_weight(f, r, (5,)) == pytest.approx(np.cos(theta), abs=1e-15)

    def test_tangency_raises(self, grid256):
        x = grid256.axis(0)
        f = GraphField(grid256, 1.2 * x)
        r = Direction.of([1.0, 1.0])
        with pytest.raises(DegenerateDirection):
            density_weight(f, r, (128,))
        with pytest.raises(DegenerateDirection):
            density_weight_field(f, r)


class TestEvalProbe:
    def test_flat_slope_zero_at_zero(self, grid256, vertical):
        f = GraphField(grid256, np.zeros(256))
        probe = eval_probe(f, vertical, 1.0, 0.0, 0.01)
        assert probe.slope == 0.0

    def test_sign_of_displacement(self, grid256, vertical):
        f = GraphField(grid256, np.zeros(256))
        assert eval_probe(f, vertical, 1.0, +0.1, 0.01).slope < 0
        assert eval_probe(f, vertical, 1.0, -0.1, 0.01).slope > 0

    def test_affine_slope_vanishes_on_plane(self, grid256, vertical):
        x = grid256.axis(0)
        f = GraphField(grid256, 0.25 * x + 0.1)
        s = np.pi  # window clear of the wrap seam at t=0.01
        probe = eval_probe(f, vertical, s, 0.25 * s + 0.1, 0.01)
        assert abs(probe.slope) <= 1e-12

    def test_derivatives_match_finite_differences(self, grid256, vertical):
        f = GraphField.from_function(grid256, lambda x: 0.8 * np.sin(x) + 0.3 * np.cos(2 * x))
        s, q, t, eps = 2.0, 0.37, 0.01, 1e-6
        probe = eval_probe(f, vertical, s, q, t)
        up = eval_probe(f, vertical, s, q + eps, t)
        dn = eval_probe(f, vertical, s, q - eps, t)
        assert probe.slope == pytest.approx((up.value - dn.value) / (2 * eps), abs=1e-8)
        assert probe.slope_dz == pytest.approx((up.slope - dn.slope) / (2 * eps), abs=1e-6)

    def test_tilted_direction_matches_directional_difference(self, grid256):
        f = sine_field(grid256, amplitude=0.4)
        r = Direction.of([0.3, 1.0])
        s, q, t, eps = 2.0, 0.1, 0.01, 1e-6
        probe = eval_probe(f, r, s, q, t)
        up = eval_probe(f, r, s + eps * r.horizontal[0], q + eps * r.upward, t)
        dn = eval_probe(f, r, s - eps * r.horizontal[0], q - eps * r.upward, t)
        assert probe.slope == pytest.approx((up.value - dn.value) / (2 * eps), abs=1e-8)

    def test_empty_stencil(self, vertical):
        grid = PeriodicGrid((TWO_PI,), (8,))
        f = GraphField(grid, np.zeros(8))
        with pytest.warns(KernelResolutionWarning):
            with pytest.raises(EmptyStencil):
                eval_probe(f, vertical, 0.39, 0.0, 1e-5)

    def test_rejects_nonpositive_time(self, grid256, vertical):
        f = GraphField(grid256, np.zeros(256))
        with pytest.raises(ValueError):
            eval_probe(f, vertical, 0.0, 0.0, 0.0)

    def test_probe_is_finite_record(self):
        with pytest.raises(ValueError):
            FieldProbe(np.nan, 0.0, 0.0)


class TestSolveSurfacePoint:
    def test_constant_is_fixed(self, grid256, vertical):
        f = GraphField(grid256, np.full(256, 0.7))
        q = solve_surface_point(f, vertical, 1.234, T)
        assert abs(q - 0.7) <= effective_root_tol(f, PARAMS)

    def test_affine_fixed_away_from_seam(self, grid256, vertical):
        x = grid256.axis(0)
        f = GraphField(grid256, 0.3 * x + 0.1)
        for i in (80, 128, 170):
            q = solve_surface_point(f, vertical, x[i], T)
            assert abs(q - f.values[i]) <= 1e-10

    def test_inflection_point_moves_at_higher_order(self, grid256, vertical):
        f = sine_field(grid256)
        q = solve_surface_point(f, vertical, 0.0, T)
        assert abs(q) <= 10 * T**1.5

    def test_matches_apply_at_nodes(self, grid256, vertical):
        f = GraphField.from_function(grid256, lambda x: 0.8 * np.sin(x) + 0.3 * np.cos(2 * x))
        out = apply_heat_step(f, vertical, T)
        x = grid256.axis(0)
        tol = effective_root_tol(f, PARAMS)
        for i in (0, 37, 200):
            assert abs(solve_surface_point(f, vertical, x[i], T) - out.values[i]) <= 4 * tol


class TestApplyHeatStep:
    def test_constant_fixed(self, grid256, vertical):
        f = GraphField(grid256, np.full(256, 0.7))
        out = apply_heat_step(f, vertical, T)
        assert sup_dist(out, f) <= effective_root_tol(f, PARAMS)
        assert out.diagnostics.nodes == 256
        assert out.diagnostics.concave_at_root == 256

    @pytest.mark.parametrize("shift", [-3.0, 0.7, 10.0])
    def test_vertical_shift_equivariance(self, grid256, vertical, shift):
        f = sine_field(grid256)
        base = apply_heat_step(f, vertical, T)
        moved = apply_heat_step(f.shifted(shift), vertical, T)
        tol = effective_root_tol(f.shifted(shift), PARAMS)
        assert np.max(np.abs(moved.values - (base.values + shift))) <= tol

    def test_one_step_consistency_d1(self, grid256, vertical):
        f = sine_field(grid256)
        out = apply_heat_step(f, vertical, T)
        target = f.values + T * hessian(f)[0, 0]
        assert np.max(np.abs(out.values - target)) <= 10 * T**1.5

    def test_horizontal_translation_exact(self, grid256, vertical):
        f = GraphField.from_function(grid256, lambda x: 0.8 * np.sin(x) + 0.3 * np.cos(2 * x))
        base = apply_heat_step(f, vertical, T)
        rolled = apply_heat_step(GraphField(grid256, np.roll(f.values, 7)), vertical, T)
        assert np.array_equal(rolled.values, np.roll(base.values, 7))

    def test_plane_invariance_off_seam(self, grid256, vertical):
        x = grid256.axis(0)
        f = GraphField(grid256, 0.1 * x + 0.1)
        with pytest.warns(MultipleRootsWarning):
            out = apply_heat_step(f, vertical, T)
        radius = PARAMS.trunc_mult * np.sqrt(4 * T * 1.01)
        clear = (x > radius) & (x < TWO_PI - radius)
        assert clear.sum() > 100
        assert np.max(np.abs(out.values - f.values)[clear]) <= 1e-9

    def test_seam_multiplicity_counted(self, grid256, vertical):
        x = grid256.axis(0)
        f = GraphField(grid256, 0.1 * x + 0.1)
        with pytest.warns(MultipleRootsWarning):
            out = apply_heat_step(f, vertical, T)
        assert out.diagnostics.multiple_roots > 0

    def test_tie_break_picks_root_nearest_reference(self):
        # synthetic two-cluster window: vertical roots near 0, 1, and between
        t = 1e-3
        displ = np.linspace(-0.02, 0.02, 9)
        heights = np.where(displ < 0, 0.0, 1.0)
        win_vals = np.tile(heights, (2, 1))
        win_gw = np.exp(-displ * displ / (4 * t))[None, :].repeat(2, axis=0)
        a = np.zeros_like(win_vals)
        upward = np.ones(2)
        tau = np.full(2, t)
        const = np.ones(2)
        refs = np.array([0.05, 0.95])
        with pytest.warns(MultipleRootsWarning):
            q, diag = hs._solve_heights(
                win_vals, win_gw, a, upward, tau, const, refs,
                1e-10, np.full(2, 3 * np.sqrt(4 * t)), 1e-3 * np.sqrt(t),
                HeatStepParams(), lambda row: (row,),
            )
            hs._warn_multiple(diag)
        assert diag.multiple_roots == 2
        assert abs(q[0] - 0.0) < 0.05 and abs(q[1] - 1.0) < 0.05

    def test_steep_seam_raises_no_bracket(self, grid256, vertical):
        x = grid256.axis(0)
        f = GraphField(grid256, 0.3 * x + 0.1)
        with pytest.raises(NoBracket) as exc:
            apply_heat_step(f, vertical, T)
        assert exc.value.node is not None

    def test_scale_free_normalization(self, grid256, vertical, monkeypatch):
        f = sine_field(grid256, amplitude=0.6)
        base = apply_heat_step(f, vertical, T)
        orig = hs._kernel_constant
        monkeypatch.setattr(hs, "_kernel_constant", lambda t, n: 5.0 * orig(t, n))
        scaled = apply_heat_step(f, vertical, T)
        assert sup_dist(scaled, base) <= effective_root_tol(f, PARAMS)

    def test_sign_structure_and_concavity(self, grid256, vertical):
        f = sine_field(grid256)
        out = apply_heat_step(f, vertical, T)
        assert out.diagnostics.concave_at_root == out.diagnostics.nodes
        assert out.diagnostics.bracket_verified == out.diagnostics.nodes
        coeff, _ = flow_parts(f, vertical)
        x = grid256.axis(0)
        for i in range(0, 256, 16):
            nu = normal_vector(f, i)
            rec_dir = Direction(tuple(nu))
            tau = coeff[i] * T
            above = eval_probe(f, rec_dir, x[i], out.values[i] + np.sqrt(T), tau)
            below = eval_probe(f, rec_dir, x[i], out.values[i] - np.sqrt(T), tau)
            at_root = eval_probe(f, rec_dir, x[i], out.values[i], tau)
            assert below.slope > 0 and above.slope < 0
            assert at_root.slope_dz < 0

    def test_resolution_guard_warns(self, vertical):
        grid = PeriodicGrid((TWO_PI,), (64,))
        f = GraphField(grid, 0.1 * np.sin(grid.axis(0)))
        with pytest.warns(KernelResolutionWarning):
            apply_heat_step(f, vertical, 1e-3)

    def test_thread_workers_bitwise_identical(self, grid256, vertical, monkeypatch):
        f = GraphField.from_function(grid256, lambda x: 0.8 * np.sin(x) + 0.3 * np.cos(2 * x))
        monkeypatch.delenv("FLOWFORGE_THREADS", raising=False)
        serial = apply_heat_step(f, vertical, T)
        monkeypatch.setenv("FLOWFORGE_THREADS", "3")
        threaded = apply_heat_step(f, vertical, T)
        assert np.array_equal(serial.values, threaded.values)
        assert serial.diagnostics.to_dict() == threaded.diagnostics.to_dict()

    def test_worker_count_parsing(self, monkeypatch):
        monkeypatch.delenv("FLOWFORGE_THREADS", raising=False)
        assert hs.worker_count() == 1
        monkeypatch.setenv("FLOWFORGE_THREADS", "4")
        assert hs.worker_count() == 4
        monkeypatch.setenv("FLOWFORGE_THREADS", "0")
        assert hs.worker_count() >= 1
        monkeypatch.setenv("FLOWFORGE_THREADS", "-2")
        with pytest.raises(ValueError):
            hs.worker_count()


def test_diagnostics_merge_is_associative_enough():
    a = hs.StepDiagnostics(nodes=3, bracket_verified=3, multiple_roots=1,
                           concave_at_root=3, newton_iters_max=2, bisect_iters_max=5)
    b = hs.StepDiagnostics(nodes=4, bracket_verified=4, multiple_roots=0,
                           concave_at_root=4, newton_iters_max=7, bisect_iters_max=1)
    ab = a.merge(b)
    assert ab.nodes == 7 and ab.multiple_roots == 1
    assert ab.newton_iters_max == 7 and ab.bisect_iters_max == 5
    assert a.merge(b).to_dict() == b.merge(a).to_dict()
