import numpy as np
import pytest

from hypctrl.model import Interval, SourceTerm
from hypctrl.pde import (BoundaryControls, ControlField, Grid, StateField,
                         cfl_dt, characteristics_oracle, sample_state,
                         solve_adjoint, solve_backward, solve_boundary_forward,
                         solve_forward, state_function)
from conftest import make_spec


def smooth_pair(x):
    """Both components equal, flat at the ends: keeps reflections smooth."""
    g = np.sin(np.pi * x) ** 2
    return np.stack([g, g])


class TestCflDt:
    def test_formula_and_snapping(self, spec_2x2):
        grid = Grid(0.0, 1.0, 100)
        dt = cfl_dt(spec_2x2, grid, 0.9, 1.0)
        assert dt <= 0.9 * grid.dx
        assert round(1.0 / dt) == pytest.approx(1.0 / dt, abs=1e-9)

    def test_max_speed_used(self):
        spec = make_spec([-2.0, 1.0], [[1.0]], [[1.0]], [(0.2, 0.8)])
        grid = Grid(0.0, 1.0, 100)
        assert cfl_dt(spec, grid, 1.0, 0.0) == pytest.approx(grid.dx / 2.0)

    def test_unit_courant_alignment(self, spec_2x2):
        grid = Grid(0.0, 1.0, 128)
        dt = cfl_dt(spec_2x2, grid, 1.0, 0.5)
        assert dt == pytest.approx(grid.dx, abs=1e-15)

    def test_bad_factor(self, spec_2x2):
        with pytest.raises(ValueError):
            cfl_dt(spec_2x2, Grid(0.0, 1.0, 100), 1.5, 1.0)


class TestSolveForward:
    def test_exact_translation_zero_inflow(self):
        # zero couplings mean zero inflow: a bump just translates
        spec = make_spec([-1.0, 1.0], [[0.0]], [[0.0]], [(0.0, 1.0)])
        grid = Grid(0.0, 1.0, 128)
        bump = lambda x: ((x > 0.4) & (x < 0.5)).astype(float)
        y0 = sample_state(state_function(bump, bump), grid, 2)
        res = solve_forward(spec, y0, None, 0.25, cfl=1.0)
        shift = round(0.25 / grid.dx)
        expected = np.zeros_like(y0.values)
        expected[0, :-shift] = y0.values[0, shift:]
        expected[1, shift:] = y0.values[1, :-shift]
        assert np.max(np.abs(res.final.values - expected)) <= 1e-14

    def test_matches_oracle_at_unit_courant(self, spec_full_domain):
        grid = Grid(0.0, 1.0, 128)
        y0 = sample_state(smooth_pair, grid, 2)
        res = solve_forward(spec_full_domain, y0, None, 0.5, cfl=1.0)
        oracle = characteristics_oracle(spec_full_domain,
                                        lambda x: smooth_pair(np.asarray(x)).ravel(),
                                        0.5, grid.centers)
        assert np.max(np.abs(res.final.values - oracle)) <= 1e-12

    def test_first_order_convergence(self, spec_full_domain):
        errs = []
        for n_cells in (64, 128):
            grid = Grid(0.0, 1.0, n_cells)
            y0 = sample_state(smooth_pair, grid, 2)
            res = solve_forward(spec_full_domain, y0, None, 0.7, cfl=0.9)
            oracle = characteristics_oracle(
                spec_full_domain, lambda x: smooth_pair(np.asarray(x)).ravel(),
                0.7, grid.centers)
            errs.append(np.max(np.abs(res.final.values - oracle)))
        assert 1.5 <= errs[0] / errs[1] <= 2.5

    def test_zero_horizon(self, spec_full_domain):
        grid = Grid(0.0, 1.0, 64)
        y0 = sample_state(smooth_pair, grid, 2)
        res = solve_forward(spec_full_domain, y0, None, 0.0)
        assert np.array_equal(res.final.values, y0.values)

    def test_traces_satisfy_couplings(self, spec_2x2):
        grid = Grid(0.0, 1.0, 64)
        y0 = sample_state(smooth_pair, grid, 2)
        res = solve_forward(spec_2x2, y0, None, 0.3, cfl=0.9)
        tr = res.traces
        assert np.allclose(tr.left[:, 1], tr.left[:, 0])
        assert np.allclose(tr.right[:, 0], tr.right[:, 1])

    def test_causality(self, spec_2x2):
        grid = Grid(0.0, 1.0, 64)
        T = 0.4
        dt = cfl_dt(spec_2x2, grid, 0.9, T)
        n_steps = round(T / dt)
        start = n_steps // 2
        vals = np.zeros((n_steps, 2, 64))
        vals[start:, :, :] = 1.0
        u = ControlField(vals, grid, dt,
                         spec_2x2.omega.contains_points(grid.centers))
        y0 = StateField(np.zeros((2, 64)), grid)
        res = solve_forward(spec_2x2, y0, u, T)
        assert not res.trajectory[:start + 1].any()
        assert res.trajectory[start + 1].any()


class TestSolveBackward:
    def test_roundtrip(self, spec_full_domain):
        grid = Grid(0.0, 1.0, 128)
        y0 = sample_state(smooth_pair, grid, 2)
        fwd = solve_forward(spec_full_domain, y0, None, 0.5, cfl=0.9)
        bwd = solve_backward(spec_full_domain, fwd.final, 0.5, cfl=0.9)
        assert np.max(np.abs(bwd.trajectory[0] - y0.values)) <= 0.05
        finer = Grid(0.0, 1.0, 256)
        y0f = sample_state(smooth_pair, finer, 2)
        fwdf = solve_forward(spec_full_domain, y0f, None, 0.5, cfl=0.9)
        bwdf = solve_backward(spec_full_domain, fwdf.final, 0.5, cfl=0.9)
        err_c = np.max(np.abs(bwd.trajectory[0] - y0.values))
        err_f = np.max(np.abs(bwdf.trajectory[0] - y0f.values))
        assert err_f <= 0.7 * err_c

    def test_zero_horizon(self, spec_full_domain):
        grid = Grid(0.0, 1.0, 64)
        y1 = sample_state(smooth_pair, grid, 2)
        res = solve_backward(spec_full_domain, y1, 0.0)
        assert res.trajectory.shape[0] == 1
        assert np.array_equal(res.trajectory[0], y1.values)

    def test_singular_coupling_rejected(self):
        spec = make_spec([-1.0, 1.0], [[0.0]], [[1.0]], [(0.0, 1.0)])
        grid = Grid(0.0, 1.0, 64)
        y1 = sample_state(smooth_pair, grid, 2)
        with pytest.raises(ValueError, match="singular"):
            solve_backward(spec, y1, 0.5)


class TestSolveBoundaryForward:
    def test_zero_data_zero_controls(self, spec_2x2):
        grid = Grid(0.0, 0.25, 32)
        y0 = StateField(np.zeros((2, 32)), grid)
        dt = cfl_dt(spec_2x2, grid, 0.9, 0.3)
        n_steps = round(0.3 / dt)
        res = solve_boundary_forward(spec_2x2, Interval(0.0, 0.25), y0,
                                     BoundaryControls(right=np.zeros((n_steps, 1))),
                                     0.3)
        assert not res.trajectory.any()

    def test_left_interval_constant_control_exact(self, spec_2x2):
        # speeds (-1, 1), coupling 1 at x=0, constant Dirichlet c on the
        # negative component at x=a, horizon short enough that the reflected
        # wave stays clear of the control end: exact solution by tracing
        a, c, T = 0.25, 0.7, 0.2
        grid = Grid(0.0, a, 100)
        g0 = lambda x: np.stack([np.cos(3 * x), np.sin(2 * x)])
        y0 = sample_state(g0, grid, 2)
        dt = cfl_dt(spec_2x2, grid, 1.0, T)
        n_steps = round(T / dt)
        res = solve_boundary_forward(spec_2x2, Interval(0.0, a), y0,
                                     BoundaryControls(right=np.full((n_steps, 1), c)),
                                     T, cfl=1.0)
        x = grid.centers
        y_minus = np.where(x + T > a, c, np.cos(3 * (x + T)))
        y_plus = np.where(x - T >= 0, np.sin(2 * (x - T)), np.cos(3 * (T - x)))
        exact = np.stack([y_minus, y_plus])
        assert np.max(np.abs(res.final.values - exact)) <= 1e-12

    def test_missing_or_misshapen_series(self, spec_2x2):
        grid = Grid(0.0, 0.25, 32)
        y0 = StateField(np.zeros((2, 32)), grid)
        with pytest.raises(ValueError, match="missing"):
            solve_boundary_forward(spec_2x2, Interval(0.0, 0.25), y0,
                                   BoundaryControls(), 0.3)
        with pytest.raises(ValueError, match="shape"):
            solve_boundary_forward(spec_2x2, Interval(0.0, 0.25), y0,
                                   BoundaryControls(right=np.zeros((3, 1))), 0.3)


class TestSolveAdjoint:
    def test_zero_final_datum(self, spec_2x2):
        grid = Grid(0.0, 1.0, 64)
        z1 = StateField(np.zeros((2, 64)), grid)
        res = solve_adjoint(spec_2x2, z1, 0.5)
        assert not res.trajectory.any()

    def test_rank_deficient_coupling_keeps_z_minus_zero(self):
        spec = make_spec([-1.0, 1.0], [[0.0]], [[1.0]], [(0.0, 1.0)])
        grid = Grid(0.0, 1.0, 200)
        vals = np.zeros((2, 200))
        vals[1] = np.sqrt(np.maximum(2.0 * (1.0 - grid.centers), 0.0))
        res = solve_adjoint(spec, StateField(vals, grid), 2.0, cfl=1.0)
        assert np.max(np.abs(res.trajectory[:, 0, :])) <= 1e-12

    def test_duality_identity_halves_under_refinement(self):
        src = SourceTerm.constant([[0.3, -0.2], [0.1, 0.4]])
        spec = make_spec([-1.0, 1.0], [[0.8]], [[1.2]], [(0.2, 0.6)], source=src)
        rng = np.random.default_rng(3)
        coef = rng.uniform(-1, 1, size=6)

        def run(n_cells):
            grid = Grid(0.0, 1.0, n_cells)
            T = 0.5
            dt = cfl_dt(spec, grid, 0.9, T)
            n_steps = round(T / dt)
            x = grid.centers
            y0 = StateField(np.stack([coef[0] * np.sin(2 * np.pi * x),
                                      coef[1] * np.cos(np.pi * x)]), grid)
            z1 = StateField(np.stack([coef[2] * np.cos(2 * np.pi * x),
                                      coef[3] * x * (1 - x)]), grid)
            ts = np.arange(n_steps) * dt
            uv = np.empty((n_steps, 2, n_cells))
            uv[:, 0, :] = coef[4] * np.sin(np.pi * ts)[:, None] \
                * np.exp(-40 * (x - 0.4) ** 2)[None, :]
            uv[:, 1, :] = coef[5] * np.cos(ts)[:, None] * np.sin(3 * x)[None, :]
            u = ControlField(uv, grid, dt, spec.omega.contains_points(x))
            fwd = solve_forward(spec, y0, u, T)
            adj = solve_adjoint(spec, z1, T)
            dx = grid.dx
            lhs = dx * np.sum(fwd.final.values * z1.values)
            rhs = dx * np.sum(y0.values * adj.trajectory[0])
            pairing = sum(dt * dx * np.sum(u.values[j] * adj.trajectory[j])
                          for j in range(n_steps))
            return abs(lhs - rhs - pairing)

        e1, e2 = run(64), run(128)
        assert 1.5 <= e1 / e2 <= 2.5


class TestCharacteristicsOracle:
    def test_pure_translation(self, spec_full_domain):
        xq = np.array([0.5, 0.6])
        vals = characteristics_oracle(spec_full_domain,
                                      lambda x: [np.sin(x), np.cos(x)], 0.1, xq)
        assert vals[0] == pytest.approx(np.sin(xq + 0.1))
        assert vals[1] == pytest.approx(np.cos(xq - 0.1))

    def test_single_reflection_at_right_boundary(self, spec_full_domain):
        # negative component queried past its reflection at x=1 picks up the
        # positive component's initial value at the mirrored foot point
        g = lambda x: 1.0 + 0.5 * np.asarray(x) ** 2
        t, x = 0.3, 0.9
        vals = characteristics_oracle(spec_full_domain,
                                      lambda xx: [0.0, g(xx)], t, [x])
        assert vals[0, 0] == pytest.approx(g(2.0 - t - x))
        assert vals[1, 0] == pytest.approx(g(x - t))

    def test_zero_horizon(self, spec_full_domain):
        xq = np.linspace(0.05, 0.95, 7)
        vals = characteristics_oracle(spec_full_domain,
                                      lambda x: [x, 2 * x], 0.0, xq)
        assert vals[0] == pytest.approx(xq)
        assert vals[1] == pytest.approx(2 * xq)

    def test_depth_guard(self, spec_full_domain):
        with pytest.raises(RuntimeError, match="depth"):
            characteristics_oracle(spec_full_domain, lambda x: [1.0, 1.0],
                                   50.0, [0.5], max_depth=10)

    def test_requires_constant_speeds_zero_source(self, spec_2x2):
        from hypctrl.model import SpeedProfile
        prof = SpeedProfile.piecewise_linear([0.0, 1.0], [[-1.0, -2.0], [1.0, 2.0]])
        spec = make_spec(prof, [[1.0]], [[1.0]], [(0.0, 1.0)])
        with pytest.raises(ValueError):
            characteristics_oracle(spec, lambda x: [0.0, 0.0], 0.1, [0.5])
        src = SourceTerm.constant([[0.0, 1.0], [0.0, 0.0]])
        spec2 = make_spec([-1.0, 1.0], [[1.0]], [[1.0]], [(0.0, 1.0)], source=src)
        with pytest.raises(ValueError):
            characteristics_oracle(spec2, lambda x: [0.0, 0.0], 0.1, [0.5])


class TestFieldTypes:
    def test_grid_minimum_size(self):
        with pytest.raises(ValueError):
            Grid(0.0, 1.0, 4)

    def test_control_field_masking_is_exact(self, spec_2x2):
        grid = Grid(0.0, 1.0, 64)
        mask = spec_2x2.omega.contains_points(grid.centers)
        vals = np.ones((5, 2, 64))
        u = ControlField(vals, grid, 0.01, mask)
        assert not u.values[:, :, ~mask].any()
        assert u.values[:, :, mask].all()

    def test_state_field_shape_checked(self):
        with pytest.raises(ValueError):
            StateField(np.zeros((2, 3)), Grid(0.0, 1.0, 64))
