"""Discretized solvers for the balance-law system and its relatives.

Everything runs on a uniform cell grid with a first-order explicit upwind
scheme: components with positive speed difference to the left, components
with negative speed to the right, and the zero-order term and control enter
explicitly per step.  Inflow ghost values come either from the boundary
couplings applied to the upwind-side cell value of the outgoing components
(first-order consistent trace) or from prescribed control series.

Four solvers share one marching kernel:

* ``solve_forward``            -- the controlled system on (0, 1);
* ``solve_backward``           -- the time-reversed uncontrolled system
                                  (couplings invert), marched via s = T - t;
* ``solve_boundary_forward``   -- the system restricted to a subinterval with
                                  Dirichlet control data on the control ends;
* ``solve_adjoint``            -- the adjoint system, whose reflections at
                                  the ends are the transposed matrices
                                  R0 = -Lambda_+(0) Q0 Lambda_-(0)^-1 and
                                  R1 = -Lambda_-(1) Q1 Lambda_+(1)^-1.

With constant speeds of equal magnitude and unit Courant number the scheme
transports exactly, reflections included; ``characteristics_oracle`` provides
the matching exact solution for constant speeds and zero source by tracing
characteristics backwards through the boundary couplings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import ControlDomain, Interval, PositionTag, SystemSpec

NAN_CHECK_EVERY = 64


@dataclass(frozen=True)
class Grid:
    """Uniform cell grid on (lo, hi); states live at cell centers."""

    lo: float
    hi: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 8:
            raise ValueError("grid needs at least 8 cells")
        if not self.hi > self.lo:
            raise ValueError("empty grid interval")

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        out = self.lo + (np.arange(self.n_cells) + 0.5) * self.dx
        out.flags.writeable = False
        return out


@dataclass(frozen=True)
class StateField:
    """State samples on a grid at one instant; values has shape (n, N)."""

    values: np.ndarray
    grid: Grid
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.n_cells:
            raise ValueError("state values must have shape (n, n_cells)")
        if not np.isfinite(v).all():
            raise ValueError("state values must be finite")
        object.__setattr__(self, "values", v)

    def norm_l2(self) -> float:
        return math.sqrt(self.grid.dx * float(np.sum(self.values ** 2)))


def sample_state(fn, grid: Grid, n: int, time: float = 0.0) -> StateField:
    """Sample a vectorized state function fn(x) -> (n, len(x)) on a grid."""
    vals = np.asarray(fn(grid.centers), dtype=float)
    if vals.shape != (n, grid.n_cells):
        raise ValueError(f"state function returned shape {vals.shape}, "
                         f"expected {(n, grid.n_cells)}")
    return StateField(vals.copy(), grid, time)


def state_function(*components):
    """Build a vectorized state function from per-component callables or
    constants, e.g. ``state_function(lambda x: np.sin(np.pi * x), 0.0)``."""
    def fn(x):
        x = np.asarray(x, dtype=float)
        rows = []
        for comp in components:
            if callable(comp):
                rows.append(np.broadcast_to(np.asarray(comp(x), dtype=float), x.shape))
            else:
                rows.append(np.full_like(x, float(comp)))
        return np.stack(rows)
    return fn


@dataclass(frozen=True)
class ControlField:
    """Time-indexed internal control; values has shape (n_steps, n, N).

    Entries outside the support mask are forced to exact zeros.
    """

    values: np.ndarray
    grid: Grid
    dt: float
    mask: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.mask, dtype=bool)
        if v.ndim != 3 or v.shape[2] != self.grid.n_cells or m.shape != (self.grid.n_cells,):
            raise ValueError("control values must have shape (n_steps, n, n_cells)")
        if not np.isfinite(v).all():
            raise ValueError("control values must be finite")
        v = np.where(m, v, 0.0)
        v.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @staticmethod
    def zeros(n: int, grid: Grid, dt: float, n_steps: int,
              omega: ControlDomain | None = None) -> "ControlField":
        mask = (omega.contains_points(grid.centers) if omega is not None
                else np.ones(grid.n_cells, dtype=bool))
        return ControlField(np.zeros((n_steps, n, grid.n_cells)), grid, dt, mask)


@dataclass(frozen=True)
class TraceRecord:
    """Boundary values of all components at both ends over the time grid."""

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray


@dataclass(frozen=True)
class EvolutionResult:
    final: StateField
    trajectory: np.ndarray
    times: np.ndarray
    traces: TraceRecord | None = None


def cfl_dt(spec: SystemSpec, grid: Grid, cfl_factor: float, horizon: float) -> float:
    """Stable time step: cfl_factor * dx / max|lambda|, then shrunk so the
    horizon is an integer number of steps."""
    if not 0.0 < cfl_factor <= 1.0:
        raise ValueError("cfl factor must lie in (0, 1]")
    if horizon < 0.0:
        raise ValueError("horizon must be nonnegative")
    dt0 = cfl_factor * grid.dx / spec.speeds.max_abs_speed()
    if horizon == 0.0:
        return dt0
    n_steps = max(1, math.ceil(horizon / dt0 - 1e-12))
    return horizon / n_steps


def _speeds_at(spec: SystemSpec, grid: Grid) -> np.ndarray:
    return np.stack([np.asarray(spec.speeds.value(k, grid.centers))
                     for k in range(spec.n)])


def _slopes_at(spec: SystemSpec, grid: Grid) -> np.ndarray:
    return np.stack([np.asarray(spec.speeds.slope(k, grid.centers))
                     for k in range(spec.n)])


class _Marcher:
    """One explicit upwind step of  dw/ds + sigma(x) dw/dx = S(x) w + f.

    States are (n, N, B) batches.  Boundary conditions are callables mapping
    (step index j, outgoing trace (n_out, B)) to inflow ghost values
    (n_in, B): at the left end the inflow components are those with positive
    sigma, at the right end those with negative sigma.
    """

    def __init__(self, sigma: np.ndarray, dt: float, dx: float,
                 bc_lo, bc_hi, source: np.ndarray | None = None):
        n, nx = sigma.shape
        self.pos = np.nonzero(sigma[:, 0] > 0)[0]
        self.neg = np.nonzero(sigma[:, 0] < 0)[0]
        if self.pos.size + self.neg.size != n:
            raise ValueError("speeds must be nonvanishing")
        cour = sigma * (dt / dx)
        if np.max(np.abs(cour)) > 1.0 + 1e-12:
            raise ValueError(f"CFL violated: max Courant number {np.max(np.abs(cour)):.3f}")
        self.cp = cour[self.pos][:, :, None]
        self.cn = cour[self.neg][:, :, None]
        self.bc_lo = bc_lo
        self.bc_hi = bc_hi
        self.dt = dt
        # source enters as  w += dt * S w  with S sampled per cell
        self.source = None if source is None or not np.any(source) else source

    def outflow_lo(self, w: np.ndarray) -> np.ndarray:
        return w[self.neg, 0, :]

    def outflow_hi(self, w: np.ndarray) -> np.ndarray:
        return w[self.pos, -1, :]

    def step(self, w: np.ndarray, j: int, forcing: np.ndarray | None = None) -> np.ndarray:
        ghost_lo = self.bc_lo(j, self.outflow_lo(w))
        ghost_hi = self.bc_hi(j, self.outflow_hi(w))
        out = w.copy()

        wp = w[self.pos]
        upwind = np.concatenate([ghost_lo[:, None, :], wp[:, :-1, :]], axis=1)
        out[self.pos] = wp - self.cp * (wp - upwind)

        wn = w[self.neg]
        downwind = np.concatenate([wn[:, 1:, :], ghost_hi[:, None, :]], axis=1)
        out[self.neg] = wn - self.cn * (downwind - wn)

        if self.source is not None:
            out += self.dt * np.einsum("xij,jxb->ixb", self.source, w)
        if forcing is not None:
            out += self.dt * forcing
        return out


def _coupling_bc(matrix: np.ndarray):
    mat = np.asarray(matrix, dtype=float)

    def bc(j, outflow):
        return mat @ outflow
    return bc


def _dirichlet_bc(series: np.ndarray):
    ser = np.asarray(series, dtype=float)

    def bc(j, outflow):
        return ser[j][:, None] if j < ser.shape[0] else ser[-1][:, None]
    return bc


def _check_finite(w: np.ndarray, j: int):
    if not np.isfinite(w).all():
        raise RuntimeError(f"solution lost finiteness at step {j}")


def _run(marcher: _Marcher, w0: np.ndarray, n_steps: int, forcing=None) -> np.ndarray:
    """March n_steps and return the whole trajectory (n_steps+1, n, N)."""
    traj = np.empty((n_steps + 1,) + w0.shape[:2])
    w = w0[:, :, None] if w0.ndim == 2 else w0
    traj[0] = w[:, :, 0]
    for j in range(n_steps):
        f = forcing(j) if forcing is not None else None
        w = marcher.step(w, j, f if f is None else f[:, :, None])
        if j % NAN_CHECK_EVERY == 0:
            _check_finite(w, j)
        traj[j + 1] = w[:, :, 0]
    _check_finite(traj[-1], n_steps)
    return traj


def _resolve_steps(spec, grid, T, cfl, control: ControlField | None):
    if control is not None:
        if control.grid != grid:
            raise ValueError("control grid does not match the state grid")
        n_steps = control.n_steps
        dt = control.dt
        if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
            raise ValueError("control series does not cover the horizon")
        return dt, n_steps
    if T == 0.0:
        return 0.0, 0
    dt = cfl_dt(spec, grid, cfl, T)
    return dt, int(round(T / dt))


def solve_forward(spec: SystemSpec, y0: StateField, u: ControlField | None,
                  T: float, cfl: float = 0.9) -> EvolutionResult:
    """March the controlled system from y0 to time T.

    Ghost values: y_+ at x=0 from Q0 applied to the y_- trace, y_- at x=1
    from Q1 applied to the y_+ trace.  The control, when given, fixes the
    time step (its own dt) and is applied explicitly per step.
    """
    grid = y0.grid
    dt, n_steps = _resolve_steps(spec, grid, T, cfl, u)
    sigma = _speeds_at(spec, grid)
    source = spec.source.at_points(grid.centers)
    m = spec.m
    marcher = _Marcher(sigma, dt, grid.dx,
                       bc_lo=_coupling_bc(spec.couplings.q0),
                       bc_hi=_coupling_bc(spec.couplings.q1),
                       source=source)
    forcing = None if u is None else (lambda j: u.values[j])
    traj = _run(marcher, y0.values, n_steps, forcing)
    times = np.arange(n_steps + 1) * dt

    left = np.empty((n_steps + 1, spec.n))
    right = np.empty((n_steps + 1, spec.n))
    left[:, :m] = traj[:, :m, 0]
    left[:, m:] = traj[:, :m, 0] @ np.asarray(spec.couplings.q0).T
    right[:, m:] = traj[:, m:, -1]
    right[:, :m] = traj[:, m:, -1] @ np.asarray(spec.couplings.q1).T
    traces = TraceRecord(times, left, right)

    final = StateField(traj[-1].copy(), grid, T)
    return EvolutionResult(final, traj, times, traces)


def solve_backward(spec: SystemSpec, y1: StateField, T: float,
                   cfl: float = 0.9) -> EvolutionResult:
    """March the time-reversed uncontrolled system from y(T) = y1 down to 0.

    Under s = T - t the speeds negate, the source flips sign, and the
    couplings invert: the inverse of Q1 feeds the positive components at
    x=1 and the inverse of Q0 the negative ones at x=0.  The returned
    trajectory is indexed by forward time (trajectory[-1] equals y1).
    """
    grid = y1.grid
    dt, n_steps = _resolve_steps(spec, grid, T, cfl, None)
    try:
        q0inv = np.linalg.inv(spec.couplings.q0)
        q1inv = np.linalg.inv(spec.couplings.q1)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular coupling matrix: {exc}") from exc
    sigma = -_speeds_at(spec, grid)
    source = -spec.source.at_points(grid.centers)
    marcher = _Marcher(sigma, dt, grid.dx,
                       bc_lo=_coupling_bc(q0inv),
                       bc_hi=_coupling_bc(q1inv),
                       source=source)
    traj = _run(marcher, y1.values, n_steps)[::-1].copy()
    times = np.arange(n_steps + 1) * dt
    final = StateField(traj[0].copy(), grid, 0.0)
    return EvolutionResult(final, traj, times)


@dataclass(frozen=True)
class BoundaryControls:
    """Dirichlet control series for a subinterval solve.

    ``left`` feeds the positive components at the left end (shape
    (n_steps, p)), ``right`` the negative components at the right end
    (shape (n_steps, m)).  Which of the two is required depends on the
    position of the interval.
    """

    left: np.ndarray | None = None
    right: np.ndarray | None = None


def solve_boundary_forward(spec: SystemSpec, interval: Interval, y0: StateField,
                           controls: BoundaryControls, T: float,
                           cfl: float = 0.9) -> EvolutionResult:
    """March the system restricted to a component of the complement of the
    refined control region, with Dirichlet data on its control ends.

    Interval touching the left boundary: coupling Q0 stays at x=0 and the
    control drives the negative components at the right end; touching the
    right boundary: mirrored; interior: controls on both ends.
    """
    grid = y0.grid
    dt, n_steps = _resolve_steps(spec, grid, T, cfl, None)
    tag = interval.tag
    m = spec.m

    def need(series, length, name):
        if series is None:
            raise ValueError(f"missing {name} control series")
        ser = np.asarray(series, dtype=float)
        if ser.shape != (n_steps, length):
            raise ValueError(f"{name} control series must have shape "
                             f"{(n_steps, length)}, got {ser.shape}")
        return ser

    if tag is PositionTag.TOUCHES_LEFT:
        bc_lo = _coupling_bc(spec.couplings.q0)
        bc_hi = _dirichlet_bc(need(controls.right, m, "right-end"))
    elif tag is PositionTag.TOUCHES_RIGHT:
        bc_lo = _dirichlet_bc(need(controls.left, spec.p, "left-end"))
        bc_hi = _coupling_bc(spec.couplings.q1)
    elif tag is PositionTag.INTERIOR:
        bc_lo = _dirichlet_bc(need(controls.left, spec.p, "left-end"))
        bc_hi = _dirichlet_bc(need(controls.right, m, "right-end"))
    else:
        raise ValueError("use solve_forward for the full domain")

    sigma = _speeds_at(spec, grid)
    source = spec.source.at_points(grid.centers)
    marcher = _Marcher(sigma, dt, grid.dx, bc_lo, bc_hi, source)
    traj = _run(marcher, y0.values, n_steps)
    times = np.arange(n_steps + 1) * dt
    return EvolutionResult(StateField(traj[-1].copy(), grid, T), traj, times)


def adjoint_reflections(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Reflection matrices of the adjoint system:
    R0 = -Lambda_+(0) Q0 Lambda_-(0)^-1 and R1 = -Lambda_-(1) Q1 Lambda_+(1)^-1."""
    m = spec.m
    lam0 = np.array([spec.speeds.value(k, 0.0) for k in range(spec.n)])
    lam1 = np.array([spec.speeds.value(k, 1.0) for k in range(spec.n)])
    r0 = -np.diag(lam0[m:]) @ spec.couplings.q0 @ np.diag(1.0 / lam0[:m])
    r1 = -np.diag(lam1[:m]) @ spec.couplings.q1 @ np.diag(1.0 / lam1[m:])
    return r0, r1


def _adjoint_marcher(spec: SystemSpec, grid: Grid, dt: float,
                     override_source=None) -> _Marcher:
    mats = (override_source if override_source is not None else spec.source)
    msrc = mats.at_points(grid.centers)
    slopes = _slopes_at(spec, grid)
    # under s = T - t the adjoint equation becomes
    #   dw/ds - Lambda dw/dx = (Lambda' + M^T) w
    src = np.transpose(msrc, (0, 2, 1)).copy()
    idx = np.arange(spec.n)
    src[:, idx, idx] += slopes.T
    r0, r1 = adjoint_reflections(spec)
    return _Marcher(-_speeds_at(spec, grid), dt, grid.dx,
                    bc_lo=_coupling_bc(r0.T), bc_hi=_coupling_bc(r1.T),
                    source=src)


def solve_adjoint(spec: SystemSpec, z1: StateField, T: float, cfl: float = 0.9,
                  override_source=None) -> EvolutionResult:
    """March the adjoint system backward from z(T) = z1.

    The adjoint of the controlled system is
        dz/dt + Lambda dz/dx = -(Lambda' + M^T) z
    with boundary reflections z_-(t,0) = R0^T z_+(t,0) and
    z_+(t,1) = R1^T z_-(t,1); when M = -Lambda' the right-hand side
    vanishes.  ``override_source`` substitutes another SourceTerm for M.
    The trajectory is indexed by forward time (trajectory[-1] equals z1).
    """
    grid = z1.grid
    dt, n_steps = _resolve_steps(spec, grid, T, cfl, None)
    marcher = _adjoint_marcher(spec, grid, dt, override_source)
    traj = _run(marcher, z1.values, n_steps)[::-1].copy()
    times = np.arange(n_steps + 1) * dt
    return EvolutionResult(StateField(traj[0].copy(), grid, 0.0), traj, times)


def characteristics_oracle(spec: SystemSpec, y0, T: float, query_x,
                           max_depth: int = 10_000) -> np.ndarray:
    """Exact solution at time T for constant speeds and zero source.

    Each component is traced backward along its characteristic; whenever the
    trace crosses a boundary the coupling matrix mixes in the outgoing
    components at the crossing time, recursively until time 0.  ``y0`` is a
    callable x -> sequence of n initial values.  Returns (n, len(query_x)).
    """
    if spec.speeds.kind != "constant":
        raise ValueError("the oracle needs constant speeds")
    if not spec.source.is_zero():
        raise ValueError("the oracle needs a zero source term")
    lam = np.asarray(spec.speeds.values, dtype=float)
    m, n = spec.m, spec.n
    q0 = np.asarray(spec.couplings.q0, dtype=float)
    q1 = np.asarray(spec.couplings.q1, dtype=float)

    def comp(k: int, t: float, x: float, depth: int) -> float:
        if depth > max_depth:
            raise RuntimeError("characteristic recursion exceeded the depth bound")
        foot = x - lam[k] * t
        if 0.0 <= foot <= 1.0:
            return float(np.asarray(y0(foot), dtype=float)[k])
        if lam[k] > 0:
            t_hit = t - x / lam[k]
            outgoing = np.array([comp(i, t_hit, 0.0, depth + 1) for i in range(m)])
            return float((q0 @ outgoing)[k - m])
        t_hit = t - (1.0 - x) / (-lam[k])
        outgoing = np.array([comp(j, t_hit, 1.0, depth + 1) for j in range(m, n)])
        return float((q1 @ outgoing)[k])

    xs = np.atleast_1d(np.asarray(query_x, dtype=float))
    out = np.empty((n, xs.size))
    for k in range(n):
        for i, x in enumerate(xs):
            out[k, i] = comp(k, float(T), float(x), 0)
    return out
