"""Command-line interface: config ingestion, subcommands, CSV emission.

Configuration is one JSON file with the keys

    n       int                 number of state components
    m       int                 number of negative speeds
    speeds  list of n entries   {"type": "constant", "value": v} or
                                {"type": "piecewise_linear", "x": [...], "v": [...]}
    M       nested list (n x n) or
            {"type": "piecewise_constant", "x": [...], "matrices": [...]}
    Q0      nested list (p x m)
    Q1      nested list (m x p)
    omega   list of [a, b] pairs
    grid    {"cells": int, "cfl": float (optional, default 0.9)}

Parsing is strict: unknown keys anywhere are rejected.  Exit codes: 0 on
success, 2 on malformed or invalid configuration, 3 when a rank condition
makes the request infinite/unanswerable, 4 when a synthesis horizon does not
exceed the minimal control time.  Every error path prints one line starting
with ``ERROR:``.  Floats are printed with 17 significant digits so repeated
runs are bit-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .canon import canonical_form
from .model import (ControlDomain, CouplingSpec, SourceTerm, SpeedProfile,
                    SystemSpec, validate)
from .obsv import detect_threshold, necessity_sweep, sigma_min_sweep
from .pde import ControlField, Grid, StateField, solve_forward
from .synth import BelowThresholdError, assemble_internal_control
from .times import minimal_control_time, refine_control_region

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RANK = 3
EXIT_HORIZON = 4


class ConfigError(ValueError):
    """Malformed or invalid configuration (maps to exit code 2)."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _fail(where: str, message: str):
    raise ConfigError(f"{where}: {message}")


def _require_keys(obj: dict, where: str, required: tuple, optional: tuple = ()):
    if not isinstance(obj, dict):
        _fail(where, "expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        _fail(where, f"unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        _fail(where, f"missing keys {missing}")


def _speed_profile(entries, n: int) -> SpeedProfile:
    if not isinstance(entries, list) or len(entries) != n:
        _fail("speeds", f"expected a list of {n} entries")
    kinds = []
    for i, e in enumerate(entries):
        _require_keys(e, f"speeds[{i}]",
                      ("type",), ("value", "x", "v"))
        kinds.append(e["type"])
    if all(k == "constant" for k in kinds):
        vals = []
        for i, e in enumerate(entries):
            if "value" not in e:
                _fail(f"speeds[{i}]", "constant entry needs 'value'")
            vals.append(float(e["value"]))
        return SpeedProfile.constant(vals)
    # at least one piecewise entry: merge all breakpoints and resample
    breakpoints = {0.0, 1.0}
    for i, (k, e) in enumerate(zip(kinds, entries)):
        if k == "piecewise_linear":
            if "x" not in e or "v" not in e:
                _fail(f"speeds[{i}]", "piecewise entry needs 'x' and 'v'")
            if len(e["x"]) != len(e["v"]):
                _fail(f"speeds[{i}]", "'x' and 'v' must have equal length")
            breakpoints.update(float(x) for x in e["x"])
        elif k != "constant":
            _fail(f"speeds[{i}]", f"unknown speed type '{k}'")
    xs = np.array(sorted(breakpoints))
    if xs[0] != 0.0 or xs[-1] != 1.0:
        _fail("speeds", "piecewise breakpoints must stay inside [0, 1]")
    rows = []
    for e, k in zip(entries, kinds):
        if k == "constant":
            rows.append(np.full(xs.size, float(e["value"])))
        else:
            rows.append(np.interp(xs, np.asarray(e["x"], float), np.asarray(e["v"], float)))
    return SpeedProfile.piecewise_linear(xs, np.stack(rows))


def _source_term(entry, n: int) -> SourceTerm:
    if isinstance(entry, list):
        mat = np.asarray(entry, dtype=float)
        if mat.shape != (n, n):
            _fail("M", f"expected an {n}x{n} matrix, got {mat.shape}")
        return SourceTerm.constant(mat)
    _require_keys(entry, "M", ("type", "x", "matrices"))
    if entry["type"] != "piecewise_constant":
        _fail("M", f"unknown source type '{entry['type']}'")
    return SourceTerm.piecewise_constant(np.asarray(entry["x"], float),
                                         np.asarray(entry["matrices"], float))


@dataclass(frozen=True)
class RunConfig:
    spec: SystemSpec
    cells: int
    cfl: float

    @property
    def grid(self) -> Grid:
        return Grid(0.0, 1.0, self.cells)


def parse_config(path) -> RunConfig:
    """Strictly parse and validate a configuration file."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc

    _require_keys(data, "config", ("n", "m", "speeds", "M", "Q0", "Q1", "omega", "grid"))
    n, m = int(data["n"]), int(data["m"])
    speeds = _speed_profile(data["speeds"], n)
    source = _source_term(data["M"], n)
    try:
        q0 = np.asarray(data["Q0"], dtype=float)
        q1 = np.asarray(data["Q1"], dtype=float)
        couplings = CouplingSpec(q0, q1)
        omega_list = data["omega"]
        if not (isinstance(omega_list, list) and omega_list
                and all(isinstance(p, list) and len(p) == 2 for p in omega_list)):
            _fail("omega", "expected a nonempty list of [a, b] pairs")
        omega = ControlDomain(tuple((float(a), float(b)) for a, b in omega_list))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config: {exc}") from exc

    _require_keys(data["grid"], "grid", ("cells",), ("cfl",))
    cells = int(data["grid"]["cells"])
    cfl = float(data["grid"].get("cfl", 0.9))
    if not np.isfinite(cfl) or not 0.0 < cfl <= 1.0:
        _fail("grid.cfl", "must lie in (0, 1]")

    spec = SystemSpec(speeds, source, couplings, omega)
    report = validate(spec)
    if not report.ok:
        first = report.failures[0]
        _fail(f"config ({first.name})", first.detail or "hypothesis violated")
    if spec.m != m:
        _fail("m", f"declared m={m} but the speeds have {spec.m} negative components")
    try:
        Grid(0.0, 1.0, cells)
    except ValueError as exc:
        raise ConfigError(f"grid.cells: {exc}") from exc
    return RunConfig(spec, cells, cfl)


def _state_from_arg(arg: str, grid: Grid, n: int) -> StateField:
    """Build a state from a preset name or a state CSV file."""
    if arg == "zero":
        return StateField(np.zeros((n, grid.n_cells)), grid)
    if arg == "sinpi":
        vals = np.zeros((n, grid.n_cells))
        vals[0] = np.sin(np.pi * grid.centers)
        return StateField(vals, grid)
    if arg == "bump":
        vals = np.zeros((n, grid.n_cells))
        vals[0] = np.exp(-60.0 * (grid.centers - 0.5) ** 2)
        return StateField(vals, grid)
    path = Path(arg)
    if not path.exists():
        raise ConfigError(f"state '{arg}' is neither a preset (zero|sinpi|bump) "
                          "nor an existing CSV file")
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] != n + 1:
        raise ConfigError(f"{arg}: expected columns x,y1..y{n}")
    vals = np.stack([np.interp(grid.centers, rows[:, 0], rows[:, 1 + k])
                     for k in range(n)])
    return StateField(vals, grid)


def _write_state_csv(stream, state: StateField):
    n = state.values.shape[0]
    stream.write("x," + ",".join(f"y{k+1}" for k in range(n)) + "\n")
    for i, x in enumerate(state.grid.centers):
        stream.write(",".join([_fmt(x)] + [_fmt(state.values[k, i]) for k in range(n)]) + "\n")


def _write_control_csv(path, control: ControlField):
    n = control.values.shape[1]
    with open(path, "w") as stream:
        stream.write("t,x," + ",".join(f"u{k+1}" for k in range(n)) + "\n")
        for j in range(control.n_steps):
            t = j * control.dt
            for i, x in enumerate(control.grid.centers):
                stream.write(",".join([_fmt(t), _fmt(x)]
                                      + [_fmt(control.values[j, k, i]) for k in range(n)]) + "\n")


def _read_control_csv(path, grid: Grid, n: int) -> ControlField:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] != n + 2:
        raise ConfigError(f"{path}: expected columns t,x,u1..u{n}")
    ts = np.unique(rows[:, 0])
    xs = np.unique(rows[:, 1])
    if xs.size != grid.n_cells or np.max(np.abs(xs - grid.centers)) > 1e-9:
        raise ConfigError(f"{path}: control grid does not match the configured grid")
    n_steps = ts.size
    dt = ts[1] - ts[0] if n_steps > 1 else float(rows[-1, 0])
    vals = rows[:, 2:].reshape(n_steps, grid.n_cells, n).transpose(0, 2, 1)
    return ControlField(vals, grid, dt, np.ones(grid.n_cells, dtype=bool))


def _print_matrix(stream, name: str, mat: np.ndarray):
    stream.write(name + ":\n")
    for row in np.atleast_2d(mat):
        stream.write(" ".join(_fmt(v) for v in row) + "\n")


def _cmd_mintime(cfg: RunConfig, args, out) -> int:
    result = minimal_control_time(cfg.spec)
    if not result.finite:
        out.write("T_inf = inf\n")
        print(f"ERROR: {result.reason}", file=sys.stderr)
        return EXIT_RANK
    out.write(f"T_inf = {_fmt(result.value)}\n")
    lines = ["lo,hi,case,value\n"]
    lines += [f"{_fmt(iv.lo)},{_fmt(iv.hi)},{r.case},{_fmt(r.value)}\n"
              for iv, r in result.per_component]
    if args.out:
        Path(args.out).write_text("".join(lines))
    else:
        out.writelines(lines)
    return EXIT_OK


def _cmd_canon(cfg: RunConfig | None, args, out) -> int:
    if args.matrix:
        try:
            mat = np.asarray(json.loads(args.matrix), dtype=float)
        except (json.JSONDecodeError, ValueError) as exc:
            raise ConfigError(f"--matrix: {exc}") from exc
    elif cfg is not None:
        mat = cfg.spec.couplings.q0 if args.which == "Q0" else cfg.spec.couplings.q1
    else:
        raise ConfigError("canon needs --matrix or --config")
    dec = canonical_form(mat)
    _print_matrix(out, "Qcanon", dec.canonical)
    out.write("pivots: " + " ".join(f"({r+1},{c+1})" for r, c in dec.pivots) + "\n")
    out.write(f"rank: {dec.rank}\n")
    _print_matrix(out, "L", dec.lower)
    _print_matrix(out, "U", dec.upper)
    return EXIT_OK


def _cmd_omegahat(cfg: RunConfig, args, out) -> int:
    try:
        refined = refine_control_region(cfg.spec, args.eps)
    except ValueError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_RANK
    out.write(f"achieved_bound = {_fmt(refined.achieved_bound)}\n")
    out.write(f"target_bound = {_fmt(refined.target_bound)}\n")
    out.write("lo,hi\n")
    for a, b in refined.region.intervals:
        out.write(f"{_fmt(a)},{_fmt(b)}\n")
    return EXIT_OK


def _cmd_simulate(cfg: RunConfig, args, out) -> int:
    grid = cfg.grid
    spec = cfg.spec
    y0 = _state_from_arg(args.y0, grid, spec.n)
    u = _read_control_csv(args.u, grid, spec.n) if args.u else None
    res = solve_forward(spec, y0, u, args.T, cfg.cfl)
    if args.out:
        with open(args.out, "w") as stream:
            _write_state_csv(stream, res.final)
    else:
        _write_state_csv(out, res.final)
    return EXIT_OK


def _cmd_synthesize(cfg: RunConfig, args, out) -> int:
    grid = cfg.grid
    spec = cfg.spec
    y0 = _state_from_arg(args.y0, grid, spec.n)
    y1 = _state_from_arg(args.y1, grid, spec.n)

    def fn(state):
        def f(x):
            return np.stack([np.interp(x, grid.centers, state.values[k])
                             for k in range(spec.n)])
        return f

    try:
        report = assemble_internal_control(spec, fn(y0), fn(y1), args.T, grid,
                                           cfl=cfg.cfl)
    except BelowThresholdError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    except ValueError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_RANK

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_control_csv(outdir / "control.csv", report.control)
    with open(outdir / "final_state.csv", "w") as stream:
        _write_state_csv(stream, report.final_state)
    summary = [f"achieved_error = {_fmt(report.achieved_error)}"]
    if report.omega_hat is not None:
        summary.append("refined_region = " + " ".join(
            f"({_fmt(a)},{_fmt(b)})" for a, b in report.omega_hat.intervals))
    if report.hum_residuals:
        summary.append("component_residuals = " + " ".join(
            _fmt(r) for r in report.hum_residuals))
    (outdir / "summary.txt").write_text("\n".join(summary) + "\n")
    out.write(f"achieved_error = {_fmt(report.achieved_error)}\n")
    return EXIT_OK


def _cmd_gramian(cfg: RunConfig, args, out) -> int:
    ts = np.linspace(args.tmin, args.tmax, args.steps)
    sweep = sigma_min_sweep(cfg.spec, ts, cfg.spec.omega, cfg.grid)
    out.write("T,sigma_min\n")
    for t, s in sweep.points:
        out.write(f"{_fmt(t)},{_fmt(s)}\n")
    thr = detect_threshold(sweep)
    if thr is not None:
        out.write(f"detected_threshold = {_fmt(thr)}\n")
    return EXIT_OK


def _cmd_necessity(cfg: RunConfig, args, out) -> int:
    nus = [int(v) for v in args.nu_list.split(",")]
    try:
        sweep = necessity_sweep(cfg.spec, nus, args.T, cfg.grid)
    except ValueError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_RANK
    out.write("nu,ratio\n")
    for nu, ratio in sweep.points:
        out.write(f"{nu},{_fmt(ratio)}\n")
    out.write(f"blowup_factor = {_fmt(sweep.blowup_factor)}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypctrl",
        description="Minimal control times and control synthesis for 1D "
                    "hyperbolic balance laws")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, config_required=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=config_required,
                       help="path to the JSON configuration")
        return p

    p = add("mintime", "minimal control time with per-component breakdown")
    p.add_argument("--out", help="write the component CSV here instead of stdout")

    p = add("canon", "canonical form of a coupling matrix", config_required=False)
    p.add_argument("--matrix", help="inline JSON matrix, e.g. '[[1,2],[3,4]]'")
    p.add_argument("--which", choices=("Q0", "Q1"), default="Q0",
                   help="which configured coupling to decompose")

    p = add("omegahat", "refine the control region to a finite union")
    p.add_argument("--eps", type=float, required=True,
                   help="admissible increase of the control time")

    p = add("simulate", "march the forward system")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--y0", required=True, help="zero | sinpi | bump | state CSV")
    p.add_argument("--u", help="control CSV produced by synthesize")
    p.add_argument("--out", help="write the final state CSV here")

    p = add("synthesize", "assemble an internal control steering y0 to y1")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--y0", required=True, help="zero | sinpi | bump | state CSV")
    p.add_argument("--y1", required=True, help="zero | sinpi | bump | state CSV")
    p.add_argument("--out", required=True, help="output directory")

    p = add("gramian", "sigma_min sweep of the observability Gramian")
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)

    p = add("necessity", "blow-up ratios for rank-deficient couplings")
    p.add_argument("--nu-list", required=True, help="comma-separated exponents")
    p.add_argument("--T", type=float, default=None,
                   help="horizon (default: the smallest admissible one)")

    return parser


def run(args, out=None) -> int:
    """Dispatch a parsed command line; returns the exit code."""
    out = out if out is not None else sys.stdout
    cfg = parse_config(args.config) if args.config else None

    if args.command == "mintime":
        return _cmd_mintime(cfg, args, out)
    if args.command == "canon":
        return _cmd_canon(cfg, args, out)
    if args.command == "omegahat":
        return _cmd_omegahat(cfg, args, out)
    if args.command == "simulate":
        return _cmd_simulate(cfg, args, out)
    if args.command == "synthesize":
        return _cmd_synthesize(cfg, args, out)
    if args.command == "gramian":
        return _cmd_gramian(cfg, args, out)
    if args.command == "necessity":
        if args.T is None:
            from .times import travel_time
            args.T = max(travel_time(cfg.spec, 0, (0.0, 1.0)),
                         travel_time(cfg.spec, cfg.spec.n - 1, (0.0, 1.0)))
        return _cmd_necessity(cfg, args, out)
    raise ConfigError(f"unknown command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BelowThresholdError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
