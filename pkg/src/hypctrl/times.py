"""Closed-form minimal control times for hyperbolic balance laws.

``travel_time`` integrates 1/|lambda_k| analytically over an interval (the
crossing time of the k-th characteristic).  The three boundary-control time
formulas combine travel times with the canonical pivots of the coupling
matrices:

* interval (0, a), control on the right end:  finite iff rank Q0 = p, value
  max_j { T_{m+j} + T_{c_j}, T_m } with c_j the pivot columns of Q0;
* interval (b, 1), control on the left end:  the mirror formula through the
  backwards-relabeled Q1;
* interior interval (c, d), controls on both ends:  max { T_m, T_{m+1} }.

``minimal_control_time`` maximizes the per-component values over the
connected components of the complement of the control region (0 when the
closure of omega covers [0, 1], infinite when the couplings are not
invertible).  ``refine_control_region`` constructively shrinks omega to a
finite union of intervals compactly inside it whose complement components
lose at most epsilon of control time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .canon import canonical_form, reversed_coupling
from .model import ControlDomain, Interval, PositionTag, SystemSpec

# Below this slope magnitude a linear speed segment integrates as constant.
CONSTANT_SLOPE_TOL = 1e-14

CASE_LEFT = "tau_minus"
CASE_RIGHT = "tau_plus"
CASE_TWO_SIDED = "tau_two_sided"


def _as_interval(interval) -> Interval:
    if isinstance(interval, Interval):
        return interval
    lo, hi = interval
    return Interval(float(lo), float(hi))


def _segment_crossing(v0: float, v1: float, x0: float, x1: float,
                      c: float, d: float) -> float:
    """Integral of 1/|a + b x| over [c, d] for the linear speed through
    (x0, v0), (x1, v1); the speed has one sign on the segment."""
    b = (v1 - v0) / (x1 - x0)
    if abs(b) < CONSTANT_SLOPE_TOL:
        mid = v0 + b * (0.5 * (c + d) - x0)
        return (d - c) / abs(mid)
    vc = v0 + b * (c - x0)
    vd = v0 + b * (d - x0)
    return abs(math.log(vd / vc) / b)


def travel_time(spec: SystemSpec, k: int, interval) -> float:
    """Crossing time of `interval` by the k-th characteristic:
    integral over the interval of 1 / |lambda_k|."""
    if not 0 <= k < spec.n:
        raise ValueError(f"component index {k} out of range")
    iv = _as_interval(interval) if not isinstance(interval, Interval) else interval
    lo, hi = iv.lo, iv.hi
    xs, vs = spec.speeds.segments(k)
    total = 0.0
    for x0, x1, v0, v1 in zip(xs[:-1], xs[1:], vs[:-1], vs[1:]):
        c, d = max(lo, x0), min(hi, x1)
        if c < d:
            total += _segment_crossing(v0, v1, x0, x1, c, d)
    return total


def characteristic_time(spec: SystemSpec, k: int, x: float) -> float:
    """Time for the k-th characteristic (positive speed) to travel from 0 to x."""
    if spec.speeds.value(k, 0.0) <= 0:
        raise ValueError("characteristic_time needs a positive-speed component")
    return travel_time(spec, k, Interval(0.0, float(x))) if x > 0 else 0.0


def characteristic_position(spec: SystemSpec, k: int, t: float) -> float:
    """Inverse of ``characteristic_time``: position reached after time t."""
    if spec.speeds.value(k, 0.0) <= 0:
        raise ValueError("characteristic_position needs a positive-speed component")
    if t <= 0.0:
        return 0.0
    xs, vs = spec.speeds.segments(k)
    acc = 0.0
    for x0, x1, v0, v1 in zip(xs[:-1], xs[1:], vs[:-1], vs[1:]):
        seg = _segment_crossing(v0, v1, x0, x1, x0, x1)
        if acc + seg >= t:
            rem = t - acc
            b = (v1 - v0) / (x1 - x0)
            if abs(b) < CONSTANT_SLOPE_TOL:
                return x0 + v0 * rem
            return x0 + v0 * (math.exp(b * rem) - 1.0) / b
        acc += seg
    if t <= acc * (1.0 + 1e-12):
        return xs[-1]
    raise ValueError(f"time {t} exceeds the full crossing time {acc}")


@dataclass(frozen=True)
class TimeTerm:
    """One candidate value inside a boundary-time maximum.

    ``lead`` is the 0-based component whose travel time leads the term;
    paired terms add the travel time of ``partner``.
    """

    lead: int
    partner: int | None
    value: float


@dataclass(frozen=True)
class BoundaryTimeResult:
    """Minimal control time of one complement component.

    ``value`` is None when the rank condition fails (no finite time);
    ``argmax`` lists the lead indices of every term attaining the maximum.
    """

    case: str
    value: float | None
    terms: tuple[TimeTerm, ...] = ()
    argmax: tuple[int, ...] = ()
    reason: str = ""

    @property
    def finite(self) -> bool:
        return self.value is not None


def _finish(case: str, terms: list[TimeTerm]) -> BoundaryTimeResult:
    value = max(t.value for t in terms)
    argmax = tuple(t.lead for t in terms if t.value == value)
    return BoundaryTimeResult(case, value, tuple(terms), argmax)


def boundary_time_left(spec: SystemSpec, interval) -> BoundaryTimeResult:
    """Control time for a component (0, a): one control on its right end,
    the physical coupling Q0 retained at x = 0."""
    iv = _as_interval(interval)
    if iv.lo != 0.0:
        raise ValueError("interval must touch the left boundary")
    m, p = spec.m, spec.p
    dec = canonical_form(spec.couplings.q0)
    if dec.rank < p:
        return BoundaryTimeResult(CASE_LEFT, None,
                                  reason=f"rank Q0 = {dec.rank} < p = {p}")
    terms = [TimeTerm(m + j, c, travel_time(spec, m + j, iv) + travel_time(spec, c, iv))
             for j, (_, c) in enumerate(dec.pivots)]
    terms.append(TimeTerm(m - 1, None, travel_time(spec, m - 1, iv)))
    return _finish(CASE_LEFT, terms)


def boundary_time_right(spec: SystemSpec, interval) -> BoundaryTimeResult:
    """Control time for a component (b, 1): one control on its left end,
    the physical coupling Q1 retained at x = 1."""
    iv = _as_interval(interval)
    if iv.hi != 1.0:
        raise ValueError("interval must touch the right boundary")
    n, m = spec.n, spec.m
    dec = canonical_form(reversed_coupling(spec.couplings.q1))
    if dec.rank < m:
        return BoundaryTimeResult(CASE_RIGHT, None,
                                  reason=f"rank Q1 = {dec.rank} < m = {m}")
    terms = [TimeTerm(m - 1 - i, n - 1 - c,
                      travel_time(spec, m - 1 - i, iv) + travel_time(spec, n - 1 - c, iv))
             for i, (_, c) in enumerate(dec.pivots)]
    terms.append(TimeTerm(m, None, travel_time(spec, m, iv)))
    return _finish(CASE_RIGHT, terms)


def boundary_time_interior(spec: SystemSpec, interval) -> BoundaryTimeResult:
    """Control time for an interior component (c, d) with controls on both
    ends: the slowest crossing among the two speed families."""
    iv = _as_interval(interval)
    m = spec.m
    terms = [TimeTerm(m - 1, None, travel_time(spec, m - 1, iv)),
             TimeTerm(m, None, travel_time(spec, m, iv))]
    return _finish(CASE_TWO_SIDED, terms)


def boundary_control_time(spec: SystemSpec, interval) -> BoundaryTimeResult:
    """Dispatch on the position of the component inside [0, 1]."""
    iv = _as_interval(interval)
    tag = iv.tag
    if tag is PositionTag.TOUCHES_LEFT:
        return boundary_time_left(spec, iv)
    if tag is PositionTag.TOUCHES_RIGHT:
        return boundary_time_right(spec, iv)
    if tag is PositionTag.INTERIOR:
        return boundary_time_interior(spec, iv)
    raise ValueError("component covering the whole domain has no boundary-control time")


@dataclass(frozen=True)
class MinimalTimeResult:
    """Minimal control time of the full problem.

    ``value`` is 0 exactly when the closure of omega covers [0, 1]; it is
    None (infinite) when the coupling matrices are not invertible.
    """

    value: float | None
    per_component: tuple[tuple[Interval, BoundaryTimeResult], ...] = ()
    covers_all: bool = False
    reason: str = ""

    @property
    def finite(self) -> bool:
        return self.value is not None


def couplings_invertible(spec: SystemSpec) -> bool:
    """Both coupling matrices square and of full rank (forces m = p)."""
    m, p = spec.m, spec.p
    q0, q1 = spec.couplings.q0, spec.couplings.q1
    return (m == p and q0.shape == (p, m) and q1.shape == (m, p)
            and canonical_form(q0).rank == p and canonical_form(q1).rank == m)


def minimal_control_time(spec: SystemSpec) -> MinimalTimeResult:
    """Exact minimal time for internal exact controllability."""
    if not couplings_invertible(spec):
        return MinimalTimeResult(None, reason="coupling matrices must be invertible")
    comps = spec.omega.complement_components()
    if not comps:
        return MinimalTimeResult(0.0, covers_all=True)
    per = tuple((iv, boundary_control_time(spec, iv)) for iv in comps)
    return MinimalTimeResult(max(r.value for _, r in per), per)


def linear_bound_constant(spec: SystemSpec) -> float:
    """C with boundary_control_time(I) <= C |I| for every component I."""
    return 2.0 / spec.speeds.min_abs_speed()


@dataclass(frozen=True)
class ClusterWindows:
    """Per-cell bookkeeping of the refinement: the first/last points of the
    control region inside partition cell `cell`, and the two subintervals
    hugging them."""

    cell: int
    enter: float
    leave: float
    j_plus: tuple[float, float]
    j_minus: tuple[float, float]


@dataclass(frozen=True)
class RefinedRegion:
    """A finite union of intervals compactly inside omega whose complement
    components cost at most ``target_bound`` of control time."""

    region: ControlDomain
    achieved_bound: float
    target_bound: float
    partition: np.ndarray
    delta: float
    clusters: tuple[ClusterWindows, ...] = field(default=())


def _pick_piece(omega: ControlDomain, lo: float, hi: float, side: str) -> tuple[float, float]:
    """An open interval compactly inside omega intersected with (lo, hi),
    taken nearest the anchored side and shrunk by 25% per side."""
    pieces = []
    for a, b in omega.intervals:
        c, d = max(a, lo), min(b, hi)
        if c < d:
            pieces.append((c, d))
    if not pieces:
        raise RuntimeError(f"control region does not meet ({lo}, {hi})")
    c, d = pieces[0] if side == "left" else pieces[-1]
    w = d - c
    return (c + 0.25 * w, d - 0.25 * w)


def refine_control_region(spec: SystemSpec, epsilon: float) -> RefinedRegion:
    """Shrink omega to a finite union of intervals, compactly contained in
    omega, whose complement components all have boundary-control time at most
    ``minimal_control_time(spec) + epsilon``.

    The construction partitions [0, 1] into cells cheap enough that each
    costs at most tau' = tau_max + epsilon/2, finds the first and last point
    of omega in every cell meeting it, enlarges the in-between gaps by a
    margin ``delta`` found by bisection so the enlarged gaps still cost at
    most tau' + epsilon/2, and keeps one small interval of omega on each side
    of every gap.  The resulting bound is verified by direct evaluation.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    base = minimal_control_time(spec)
    if not base.finite:
        raise ValueError("coupling matrices must be invertible")
    if base.covers_all:
        raise ValueError("the closure of omega already covers [0, 1]")

    tau = base.value
    tau_prime = tau + 0.5 * epsilon
    limit = min(tau_prime + 0.5 * epsilon, tau + epsilon)
    omega = spec.omega

    cbound = linear_bound_constant(spec)
    ncells = max(1, math.ceil(cbound / tau_prime))
    partition = np.linspace(0.0, 1.0, ncells + 1)

    clusters: list[tuple[int, float, float]] = []
    for k in range(ncells):
        lo, hi = partition[k], partition[k + 1]
        enter, leave = np.inf, -np.inf
        for a, b in omega.intervals:
            c, d = max(a, lo), min(b, hi)
            if c < d:
                enter = min(enter, c)
                leave = max(leave, d)
        if enter < leave:
            clusters.append((k, enter, leave))
    if not clusters:
        raise RuntimeError("control region meets no partition cell")

    first_enter = clusters[0][1]
    last_leave = clusters[-1][2]

    caps = [0.5 * (leave - enter) for _, enter, leave in clusters]
    if first_enter > 0.0:
        caps.append(0.5 * (1.0 - first_enter))
    if last_leave < 1.0:
        caps.append(0.5 * last_leave)
    for (_, _, leave), (_, enter, _) in zip(clusters, clusters[1:]):
        caps.append(0.5 * leave)
        caps.append(0.5 * (1.0 - enter))
    delta = min(caps)

    def bounds_hold(d: float) -> bool:
        if first_enter > 0.0:
            if boundary_time_left(spec, Interval(0.0, first_enter + d)).value > limit:
                return False
        if last_leave < 1.0:
            if boundary_time_right(spec, Interval(last_leave - d, 1.0)).value > limit:
                return False
        for (_, _, leave), (_, enter, _) in zip(clusters, clusters[1:]):
            if leave < enter:
                if boundary_time_interior(spec, Interval(leave - d, enter + d)).value > limit:
                    return False
        return True

    for _ in range(60):
        if bounds_hold(delta):
            break
        delta *= 0.5
    else:
        raise RuntimeError("bisection for the enlargement margin exhausted 60 halvings")

    windows: list[ClusterWindows] = []
    pieces: list[tuple[float, float]] = []
    for cell, enter, leave in clusters:
        j_plus = _pick_piece(omega, enter, enter + delta, side="left")
        j_minus = _pick_piece(omega, leave - delta, leave, side="right")
        windows.append(ClusterWindows(cell, enter, leave, j_plus, j_minus))
        pieces.extend([j_plus, j_minus])

    region = ControlDomain(tuple(sorted(set(pieces))))

    if not omega.compactly_contains(region):
        raise RuntimeError("refined region is not compactly contained in omega")
    achieved = max(boundary_control_time(spec, iv).value
                   for iv in region.complement_components())
    if achieved > tau + epsilon:
        raise RuntimeError(
            f"refined region misses the target bound: {achieved} > {tau + epsilon}")

    return RefinedRegion(region, achieved, tau + epsilon, partition, delta, tuple(windows))
