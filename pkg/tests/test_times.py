import math

import numpy as np
import pytest
from scipy.integrate import quad

from hypctrl.model import ControlDomain, Interval, SpeedProfile
from hypctrl.times import (boundary_control_time, boundary_time_interior,
                           boundary_time_left, boundary_time_right,
                           characteristic_position, characteristic_time,
                           linear_bound_constant, minimal_control_time,
                           refine_control_region, travel_time)
from conftest import make_spec


def random_omega(rng, max_pieces=3, min_gap=0.02):
    while True:
        k = int(rng.integers(1, max_pieces + 1))
        pts = np.sort(rng.uniform(0.0, 1.0, size=2 * k))
        if np.min(np.diff(pts)) < min_gap:
            continue
        return ControlDomain(tuple(zip(pts[0::2], pts[1::2])))


class TestTravelTime:
    def test_constant_speed(self):
        spec = make_spec([-2.0, 2.0], [[1.0]], [[1.0]], [(0.25, 0.75)])
        assert travel_time(spec, 1, (0.2, 0.5)) == pytest.approx(0.15, abs=1e-15)

    def test_linear_profile_log_antiderivative(self):
        # speed 1 + x on (0, 1): crossing time is log 2
        prof = SpeedProfile.piecewise_linear([0.0, 1.0], [[-1.0, -1.0], [1.0, 2.0]])
        spec = make_spec(prof, [[1.0]], [[1.0]], [(0.2, 0.8)])
        t = travel_time(spec, 1, (0.0, 1.0))
        assert t == pytest.approx(math.log(2.0), abs=1e-12)
        reference, _ = quad(lambda x: 1.0 / (1.0 + x), 0.0, 1.0, epsabs=1e-12)
        assert t == pytest.approx(reference, abs=1e-10)

    def test_multi_segment_against_quadrature(self):
        xs = [0.0, 0.3, 0.7, 1.0]
        vals = [[-2.0, -1.0, -1.5, -2.5], [0.5, 1.0, 1.0, 3.0]]
        prof = SpeedProfile.piecewise_linear(xs, vals)
        spec = make_spec(prof, [[1.0]], [[1.0]], [(0.2, 0.8)])
        for k in (0, 1):
            for lo, hi in [(0.0, 1.0), (0.1, 0.55), (0.65, 0.95)]:
                ref, _ = quad(lambda x: 1.0 / abs(np.interp(x, xs, vals[k])),
                              lo, hi, epsabs=1e-12, limit=200)
                assert travel_time(spec, k, (lo, hi)) == pytest.approx(ref, abs=1e-10)

    def test_vanishing_interval(self, spec_2x2):
        assert travel_time(spec_2x2, 0, (0.4, 0.4 + 1e-12)) <= 2e-12

    def test_bad_component(self, spec_2x2):
        with pytest.raises(ValueError):
            travel_time(spec_2x2, 5, (0.0, 1.0))

    def test_characteristic_time_inverts(self):
        prof = SpeedProfile.piecewise_linear([0.0, 0.5, 1.0],
                                             [[-1.0] * 3, [1.0, 2.0, 1.5]])
        spec = make_spec(prof, [[1.0]], [[1.0]], [(0.2, 0.8)])
        for x in (0.1, 0.45, 0.5, 0.81, 1.0):
            t = characteristic_time(spec, 1, x)
            assert characteristic_position(spec, 1, t) == pytest.approx(x, abs=1e-12)


class TestBoundaryTimes:
    def test_left_2x2(self, spec_2x2):
        res = boundary_time_left(spec_2x2, Interval(0.0, 0.25))
        assert res.value == pytest.approx(0.5, abs=1e-15)
        # the paired term 0.25 + 0.25 dominates the lone term 0.25
        assert sorted(t.value for t in res.terms) == pytest.approx([0.25, 0.5])

    def test_left_rank_deficient_is_infinite(self, spec_2x2):
        spec = make_spec([-1.0, 1.0], [[0.0]], [[1.0]], [(0.25, 0.75)])
        res = boundary_time_left(spec, Interval(0.0, 0.25))
        assert not res.finite
        assert "rank" in res.reason

    def test_left_4x4(self, spec_4x4):
        res = boundary_time_left(spec_4x4, Interval(0.0, 0.3))
        assert res.value == pytest.approx(0.45, abs=1e-15)
        values = sorted(t.value for t in res.terms)
        assert values == pytest.approx([0.3, 0.4, 0.45])

    def test_right_2x2(self, spec_2x2):
        res = boundary_time_right(spec_2x2, Interval(0.75, 1.0))
        assert res.value == pytest.approx(0.5, abs=1e-15)

    def test_right_4x4(self, spec_4x4):
        res = boundary_time_right(spec_4x4, Interval(0.8, 1.0))
        assert res.value == pytest.approx(0.3, abs=1e-15)
        values = sorted(t.value for t in res.terms)
        assert values == pytest.approx([0.2, 0.8 / 3.0, 0.3])

    def test_right_rank_deficient_is_infinite(self):
        spec = make_spec([-2.0, -1.0, 1.0, 3.0],
                         np.eye(2), [[1.0, 2.0], [2.0, 4.0]], [(0.3, 0.8)])
        res = boundary_time_right(spec, Interval(0.8, 1.0))
        assert not res.finite

    def test_interior(self, spec_2x2, spec_4x4):
        assert boundary_time_interior(spec_2x2, Interval(0.2, 0.4)).value \
            == pytest.approx(0.2, abs=1e-15)
        assert boundary_time_interior(spec_4x4, Interval(0.2, 0.4)).value \
            == pytest.approx(0.2, abs=1e-15)

    def test_interior_degenerate(self, spec_2x2):
        assert boundary_time_interior(spec_2x2, Interval(0.3, 0.3 + 1e-12)).value \
            <= 1e-11

    def test_dispatch(self, spec_2x2):
        assert boundary_control_time(spec_2x2, Interval(0.0, 0.25)).case == "tau_minus"
        assert boundary_control_time(spec_2x2, Interval(0.2, 0.4)).case == "tau_two_sided"
        assert boundary_control_time(spec_2x2, Interval(0.75, 1.0)).case == "tau_plus"
        with pytest.raises(ValueError):
            boundary_control_time(spec_2x2, Interval(0.0, 1.0))

    def test_wrong_anchor_rejected(self, spec_2x2):
        with pytest.raises(ValueError):
            boundary_time_left(spec_2x2, Interval(0.1, 0.3))
        with pytest.raises(ValueError):
            boundary_time_right(spec_2x2, Interval(0.1, 0.3))

    def test_value_equals_max_of_terms(self, spec_4x4):
        for iv in (Interval(0.0, 0.3), Interval(0.8, 1.0), Interval(0.2, 0.5)):
            res = boundary_control_time(spec_4x4, iv)
            assert res.value == max(t.value for t in res.terms)
            assert all(any(t.lead == a for t in res.terms) for a in res.argmax)


class TestMinimalControlTime:
    def test_example_2x2(self, spec_2x2):
        res = minimal_control_time(spec_2x2)
        assert res.value == pytest.approx(0.5, abs=1e-15)
        assert not res.covers_all

    def test_covering_union_gives_zero(self):
        spec = make_spec([-1.0, 1.0], [[1.0]], [[1.0]], [(0.0, 0.5), (0.5, 1.0)])
        res = minimal_control_time(spec)
        assert res.value == 0.0
        assert res.covers_all

    def test_example_4x4_matches_independent_sides(self, spec_4x4):
        res = minimal_control_time(spec_4x4)
        assert res.value == pytest.approx(0.45, abs=1e-15)
        left = boundary_time_left(spec_4x4, Interval(0.0, 0.3)).value
        right = boundary_time_right(spec_4x4, Interval(0.8, 1.0)).value
        assert res.value == max(left, right)

    def test_singular_couplings_flagged_infinite(self):
        spec = make_spec([-1.0, 1.0], [[0.0]], [[1.0]], [(0.25, 0.75)])
        res = minimal_control_time(spec)
        assert not res.finite
        assert "invertible" in res.reason

    def test_rectangular_couplings_flagged_infinite(self):
        spec = make_spec([-2.0, -1.0, 1.0], np.ones((1, 2)), np.ones((2, 1)),
                         [(0.25, 0.75)])
        assert not minimal_control_time(spec).finite


class TestFormulaProperties:
    def test_nested_monotonicity_same_case(self):
        rng = np.random.default_rng(5)
        spec = make_spec([-2.0, -1.0, 1.0, 3.0], np.eye(2), np.eye(2),
                         [(0.4, 0.6)])
        for _ in range(300):
            a, b = np.sort(rng.uniform(0.05, 0.95, 2))
            if b - a < 1e-3:
                continue
            inner, outer = Interval(a, b), Interval(max(a - 0.04, 0.01),
                                                    min(b + 0.04, 0.99))
            assert boundary_time_interior(spec, inner).value \
                <= boundary_time_interior(spec, outer).value
            assert boundary_time_left(spec, Interval(0.0, a)).value \
                <= boundary_time_left(spec, Interval(0.0, b)).value
            assert boundary_time_right(spec, Interval(b, 1.0)).value \
                <= boundary_time_right(spec, Interval(a, 1.0)).value

    def test_linear_bound(self):
        rng = np.random.default_rng(6)
        prof = SpeedProfile.piecewise_linear([0.0, 0.5, 1.0],
                                             [[-2.0, -1.5, -2.0],
                                              [-1.0, -0.5, -0.8],
                                              [0.5, 1.0, 0.75],
                                              [2.0, 2.0, 2.0]])
        spec = make_spec(prof, np.eye(2), np.eye(2), [(0.4, 0.6)])
        c = linear_bound_constant(spec)
        for _ in range(300):
            a, b = np.sort(rng.uniform(0.0, 1.0, 2))
            if b - a < 1e-6:
                continue
            assert boundary_time_interior(spec, Interval(a, b)).value <= c * (b - a)
            if a > 0:
                assert boundary_time_right(spec, Interval(a, 1.0)).value <= c * (1 - a)
            if b < 1:
                assert boundary_time_left(spec, Interval(0.0, b)).value <= c * b

    def test_continuity_under_shrinking_enlargement(self, spec_4x4):
        c = linear_bound_constant(spec_4x4)
        base = Interval(0.3, 0.6)
        value = boundary_time_interior(spec_4x4, base).value
        for eps in (0.1, 0.01, 0.001, 1e-6):
            bigger = Interval(base.lo - eps, base.hi + eps)
            diff = boundary_time_interior(spec_4x4, bigger).value - value
            assert 0.0 <= diff <= c * 2 * eps + 1e-15

    def test_control_region_monotonicity(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            omega1 = random_omega(rng)
            # enlarge each piece a little and add one more piece when it fits
            pieces = [(max(0.0, a - 0.01), min(1.0, b + 0.01))
                      for a, b in omega1.intervals]
            merged = []
            for a, b in sorted(pieces):
                if merged and a <= merged[-1][1]:
                    merged[-1] = (merged[-1][0], max(merged[-1][1], b))
                else:
                    merged.append((a, b))
            omega2 = ControlDomain(tuple(merged))
            spec1 = make_spec([-1.0, 1.0], [[1.0]], [[1.0]], omega1.intervals)
            spec2 = make_spec([-1.0, 1.0], [[1.0]], [[1.0]], omega2.intervals)
            t1 = minimal_control_time(spec1).value
            t2 = minimal_control_time(spec2).value
            assert t2 <= t1

    def test_right_formula_equals_mirrored_left_formula(self):
        # reflecting x -> 1-x and relabeling the components backwards turns a
        # right-end control problem into a left-end one; the two closed-form
        # values must coincide
        from hypctrl.canon import reversed_coupling
        rng = np.random.default_rng(42)
        trials = 0
        while trials < 200:
            m = int(rng.integers(1, 3))
            p = int(rng.integers(1, 3))
            neg = np.sort(-rng.uniform(0.3, 3.0, m))
            pos = np.sort(rng.uniform(0.3, 3.0, p))
            q1 = rng.uniform(-1, 1, (m, p))
            if np.linalg.matrix_rank(q1) < m:
                continue
            q0 = rng.uniform(-1, 1, (p, m))
            speeds = np.concatenate([neg, pos])
            spec = make_spec(speeds, q0, q1, [(0.4, 0.6)])
            mirror = make_spec(-speeds[::-1], reversed_coupling(q1),
                               reversed_coupling(q0), [(0.4, 0.6)])
            b = float(rng.uniform(0.05, 0.9))
            right = boundary_time_right(spec, Interval(b, 1.0)).value
            left = boundary_time_left(mirror, Interval(0.0, 1.0 - b)).value
            assert right == left
            trials += 1

    def test_closed_form_when_region_touches_both_ends(self):
        # with constant speeds and a region touching both boundary points,
        # every complement component is interior, so the minimal time is the
        # largest component length times max(T_m, T_{m+1})
        rng = np.random.default_rng(12)
        for _ in range(100):
            cuts = np.sort(rng.uniform(0.05, 0.95, 4))
            if np.min(np.diff(cuts)) < 0.01:
                continue
            omega = ((0.0, cuts[0]), (cuts[1], cuts[2]), (cuts[3], 1.0))
            spec = make_spec([-2.0, -1.0, 1.0, 3.0], np.eye(2), np.eye(2), omega)
            lengths = [cuts[1] - cuts[0], cuts[3] - cuts[2]]
            t_m = travel_time(spec, 1, (0.0, 1.0))
            t_m1 = travel_time(spec, 2, (0.0, 1.0))
            expected = max(lengths) * max(t_m, t_m1)
            assert minimal_control_time(spec).value \
                == pytest.approx(expected, rel=1e-14)

    def test_closed_form_for_symmetric_2x2(self):
        # with speeds (-c, c) and unit couplings the minimal time reduces to
        # max(a, 1-b) * (T_1 + T_2); dyadic c keeps the arithmetic exact
        rng = np.random.default_rng(9)
        for c in (1.0, 2.0, 0.5):
            spec_full = make_spec([-c, c], [[1.0]], [[1.0]], [(0.0, 1.0)])
            t1 = travel_time(spec_full, 0, (0.0, 1.0))
            t2 = travel_time(spec_full, 1, (0.0, 1.0))
            for _ in range(100):
                a, b = np.sort(rng.uniform(0.01, 0.99, 2))
                if b - a < 1e-3:
                    continue
                spec = make_spec([-c, c], [[1.0]], [[1.0]], [(a, b)])
                assert minimal_control_time(spec).value == max(a, 1 - b) * (t1 + t2)


class TestRefineControlRegion:
    def test_single_interval(self, spec_2x2):
        refined = refine_control_region(spec_2x2, 0.1)
        assert spec_2x2.omega.compactly_contains(refined.region)
        assert refined.achieved_bound <= 0.6
        assert len(refined.region.intervals) >= 2

    def test_full_domain_rejected(self, spec_full_domain):
        with pytest.raises(ValueError):
            refine_control_region(spec_full_domain, 0.1)

    def test_singular_couplings_rejected(self):
        spec = make_spec([-1.0, 1.0], [[0.0]], [[1.0]], [(0.25, 0.75)])
        with pytest.raises(ValueError):
            refine_control_region(spec, 0.1)

    def test_two_component_region(self):
        spec = make_spec([-1.0, 1.0], [[1.0]], [[1.0]],
                         [(0.1, 0.3), (0.6, 0.9)])
        tau = minimal_control_time(spec).value
        refined = refine_control_region(spec, 0.05)
        assert spec.omega.compactly_contains(refined.region)
        assert len(refined.region.intervals) >= 2
        worst = max(boundary_control_time(spec, iv).value
                    for iv in refined.region.complement_components())
        assert worst <= tau + 0.05

    def test_random_regions_meet_posted_bound(self):
        rng = np.random.default_rng(10)
        spec_proto = make_spec([-1.0, 1.0], [[1.0]], [[1.0]], [(0.4, 0.6)])
        checked = 0
        while checked < 60:
            omega = random_omega(rng)
            if not omega.complement_components():
                continue
            spec = make_spec([-1.0, 1.0], [[1.0]], [[1.0]], omega.intervals,
                             source=spec_proto.source)
            tau = minimal_control_time(spec).value
            if tau == 0.0:
                continue
            for frac in (0.2, 0.1, 0.05):
                refined = refine_control_region(spec, frac * tau)
                assert omega.compactly_contains(refined.region)
                assert refined.achieved_bound <= tau + frac * tau
            checked += 1
