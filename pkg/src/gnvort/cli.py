"""Run orchestration, output serialization, convergence studies, and the
`gnvort` command line."""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .config import ScenarioConfig, parse_config_file, serialize_config
from .core import ModelState, Tier
from .diagnostics import ConservationTrace, conservation_monitor, energy_report
from .errors import DegenerateStudy, GnvortError
from .models import tendency
from .reconstruct import evolve_levels, reconstruct_velocity
from .timestep import StepSettings, filtered_rhs, rk4_step, stable_dt

_TIME_TOL = 1e-9


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-gnvort-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def _field_columns(state: ModelState):
    """(header names, column arrays) for a fields_<t>.csv file."""
    grid = state.grid
    names, cols = [], []
    if grid.dim == 1:
        names += ["x", "zeta", "vbar_x"]
        cols += [grid.x, state.zeta, state.vbar]
        if state.vsharp is not None:
            names.append("vsharp_x")
            cols.append(state.vsharp)
        if state.E is not None:
            names.append("E_11")
            cols.append(state.E)
        if state.F is not None:
            names.append("F_111")
            cols.append(state.F)
    else:
        names += ["x", "y", "zeta", "vbar_x", "vbar_y"]
        cols += [grid.x, grid.y, state.zeta, state.vbar[0], state.vbar[1]]
        if state.vsharp is not None:
            names += ["vsharp_x", "vsharp_y"]
            cols += [state.vsharp[0], state.vsharp[1]]
        if state.E is not None:
            names += ["E_11", "E_12", "E_22"]
            cols += list(state.E)
        if state.F is not None:
            names += ["F_111", "F_112", "F_122", "F_222"]
            cols += list(state.F)
    return names, [np.ravel(c) for c in cols]


def _write_fields(path: str, state: ModelState):
    names, cols = _field_columns(state)
    _write_csv(path, names, zip(*cols))


def _write_levels(path: str, state: ModelState, rec):
    grid = state.grid
    if grid.dim == 1:
        header = ["x", "theta", "Vx", "w"]
    else:
        header = ["x", "y", "theta", "Vx", "Vy", "w"]
    rows = []
    x = np.ravel(grid.x)
    y = np.ravel(grid.y) if grid.dim == 2 else None
    for i, theta in enumerate(rec.thetas):
        w = np.ravel(rec.w[i])
        if grid.dim == 1:
            V = np.ravel(rec.V[i])
            rows.extend(zip(x, [theta] * x.size, V, w))
        else:
            Vx, Vy = np.ravel(rec.V[i][0]), np.ravel(rec.V[i][1])
            rows.extend(zip(x, y, [theta] * x.size, Vx, Vy, w))
    _write_csv(path, header, rows)


def _sample_times(cfg: ScenarioConfig):
    times = [0.0]
    if cfg.sample_every is not None:
        k = 1
        while k * cfg.sample_every < cfg.t_end - _TIME_TOL:
            times.append(k * cfg.sample_every)
            k += 1
    times.append(cfg.t_end)
    return times


@dataclass
class RunResult:
    """In-memory products of one scenario run."""

    trace: ConservationTrace
    samples: list = field(default_factory=list)       # (t, state) at sample times
    snapshots: list = field(default_factory=list)     # every accepted step
    steps: int = 0

    @property
    def final_state(self) -> ModelState:
        return self.samples[-1][1]


def simulate(cfg: ScenarioConfig, keep_snapshots: bool | None = None) -> RunResult:
    """Advance a scenario to t_end, collecting the conservation trace and
    the states at the sample times."""
    grid = cfg.build_grid()
    scales = cfg.build_scales()
    bathy = cfg.build_bathymetry(grid)
    state = cfg.build_state(grid, bathy, scales)
    settings = StepSettings(t_end=cfg.t_end, cfl=cfg.cfl, fixed_dt=cfg.fixed_dt,
                            filter_delta=cfg.filter_delta)
    rhs = filtered_rhs(cfg.filter_delta, tendency)
    keep = cfg.reconstruction if keep_snapshots is None else keep_snapshots

    result = RunResult(ConservationTrace())
    conservation_monitor(result.trace, 0.0, energy_report(state, bathy, scales),
                         float(np.max(np.abs(state.zeta))))
    boundaries = _sample_times(cfg)
    result.samples.append((0.0, state))
    if keep:
        result.snapshots.append(state)
    next_idx = 1

    while state.t < cfg.t_end - _TIME_TOL:
        if result.steps >= settings.max_steps:
            raise GnvortError(f"step budget exhausted at t={state.t:.6g}")
        dt = stable_dt(state, bathy, scales, settings)
        dt = min(dt, boundaries[next_idx] - state.t)
        state = rk4_step(state, bathy, scales, dt, rhs)
        result.steps += 1
        conservation_monitor(result.trace, state.t,
                             energy_report(state, bathy, scales),
                             float(np.max(np.abs(state.zeta))))
        if keep:
            result.snapshots.append(state)
        if abs(state.t - boundaries[next_idx]) < _TIME_TOL:
            result.samples.append((boundaries[next_idx], state))
            next_idx += 1
    return result


def _meta_text(cfg: ScenarioConfig, result: RunResult) -> str:
    import scipy

    cascade = "unconstrained (tabulated)" if cfg.unconstrained_cascade else \
        f"from shear spec '{cfg.shear_kind}'"
    notes = [
        f"gnvort {__version__}",
        f"python {sys.version.split()[0]}, numpy {np.__version__}, "
        f"scipy {scipy.__version__}",
        "",
        "# conventions",
        "state is dimensionless; h = 1 + epsilon*zeta - beta*b",
        "energies in units rho*g*(epsilon*h0)^2 per horizontal area"
        + (" (converted to dimensional)" if cfg.g is not None else ""),
        "linear shear cascades use the closed forms (omega*h, omega^2 h^3/12, 0);"
        " polynomial/tabulated shear uses theta-quadrature",
        "shear profiles are starred: the trapezoid theta-mean is removed",
        f"cascade data: {cascade}",
        f"hyperdiffusion delta = {_fmt(cfg.filter_delta)}",
        f"steps taken: {result.steps}",
        "",
        "# config (normalized)",
        serialize_config(cfg).rstrip(),
    ]
    return "\n".join(notes) + "\n"


def run_scenario(cfg: ScenarioConfig, output_dir: str = "gnvort_out",
                 quiet: bool = False) -> int:
    """Execute a scenario and write trace/fields/levels/meta files.

    Returns a process exit status; solver failures name the failing step
    and time on stderr.
    """
    os.makedirs(output_dir, exist_ok=True)
    say = (lambda *a: None) if quiet else print
    try:
        result = simulate(cfg)
    except GnvortError as exc:
        print(f"gnvort: main solve failed: {exc}", file=sys.stderr)
        return 1

    trace = result.trace
    rows = zip(trace.t, trace.mass, trace.energy_total, trace.e_p, trace.e_k,
               trace.e_rot, trace.mass_drift, trace.energy_drift)
    _write_csv(os.path.join(output_dir, "trace.csv"),
               ["t", "mass", "energy_total", "e_p", "e_k", "e_rot",
                "mass_drift", "energy_drift"], rows)

    if cfg.out_fields == "all":
        for t, state in result.samples:
            _write_fields(os.path.join(output_dir, f"fields_{t:.6f}.csv"), state)

    if cfg.reconstruction:
        grid = cfg.build_grid()
        scales = cfg.build_scales()
        bathy = cfg.build_bathymetry(grid)
        by_time = {round(t / _TIME_TOL): s for t, s in result.samples}

        def on_sample(t, levels):
            state = by_time[round(t / _TIME_TOL)]
            rec = reconstruct_velocity(levels, state, bathy, scales, cfg.rec_order)
            _write_levels(os.path.join(output_dir, f"levels_{t:.6f}.csv"), state, rec)

        try:
            levels = cfg.build_levels(grid, bathy, scales, result.snapshots[0])
            evolve_levels(levels, result.snapshots, bathy, scales, cfg.rec_order,
                          sample_times=[t for t, _ in result.samples],
                          on_sample=on_sample)
        except GnvortError as exc:
            print(f"gnvort: level reconstruction failed at t={exc}", file=sys.stderr)
            return 1

    _atomic_write(os.path.join(output_dir, "meta.txt"), _meta_text(cfg, result))
    say(f"gnvort: run complete, {result.steps} steps, outputs in {output_dir}")
    return 0


# ---------------------------------------------------------------------------
# convergence studies


def _with_resolution(cfg: ScenarioConfig, n: int, base_n: int, dt) -> ScenarioConfig:
    if cfg.dim == 1:
        shape = (n,)
    else:
        shape = (n, max(8, round(n * cfg.shape[1] / cfg.shape[0])))
    fixed_dt = dt
    if fixed_dt is None and cfg.fixed_dt is not None:
        fixed_dt = cfg.fixed_dt * base_n / n
    return replace(cfg, shape=shape, fixed_dt=fixed_dt, sample_every=None,
                   reconstruction=False)


def convergence_study(cfg: ScenarioConfig, grids, dts=None,
                      output_dir: str = "gnvort_out", quiet: bool = True):
    """Run a scenario over several resolutions; tabulate successive-difference
    norms, observed orders, and energy-drift orders.  Writes convergence.csv."""
    grids = [int(g) for g in grids]
    if len(grids) < 3:
        raise DegenerateStudy("need at least 3 resolutions")
    if len(set(grids)) != len(grids):
        raise DegenerateStudy("resolution list contains duplicates")
    if sorted(grids) != grids:
        raise DegenerateStudy("resolutions must be increasing")
    if dts is not None and len(dts) != len(grids):
        raise DegenerateStudy("dt list must match the grid list")

    runs: dict[int, RunResult | None] = {}
    for i, n in enumerate(grids):
        sub = _with_resolution(cfg, n, grids[0], dts[i] if dts else None)
        try:
            runs[n] = simulate(sub, keep_snapshots=False)
        except GnvortError as exc:
            if not quiet:
                print(f"gnvort: resolution {n} failed: {exc}", file=sys.stderr)
            runs[n] = None

    rows = []
    diffs: dict[str, list] = {"zeta": [], "vbar": []}
    for n1, n2 in zip(grids[:-1], grids[1:]):
        r1, r2 = runs[n1], runs[n2]
        if r1 is None or r2 is None:
            rows.append(("field_diff", "zeta", n1, n2, math.nan, math.nan, "failed"))
            continue
        s1, s2 = r1.final_state, r2.final_state
        if n2 % n1 != 0:
            raise DegenerateStudy(f"{n2} is not a multiple of {n1}")
        stride = n2 // n1
        for name in ("zeta", "vbar"):
            f1, f2 = getattr(s1, name), getattr(s2, name)
            if cfg.dim == 1:
                d = float(np.max(np.abs(f2[..., ::stride] - f1)))
            else:
                sy = s2.grid.shape[1] // s1.grid.shape[1]
                d = float(np.max(np.abs(f2[..., ::stride, ::sy] - f1)))
            diffs[name].append((n1, n2, d))

    for name, pairs in diffs.items():
        for i, (n1, n2, d) in enumerate(pairs):
            order = math.nan
            if i > 0:
                dprev = pairs[i - 1][2]
                if d > 0 and dprev > 0:
                    order = math.log(dprev / d) / math.log(n1 / pairs[i - 1][0])
            rows.append(("field_diff", name, n1, n2, d, order, "ok"))

    drift_rows = []
    for n in grids:
        r = runs[n]
        if r is None:
            drift_rows.append((n, math.nan, "failed"))
        else:
            drift_rows.append((n, r.trace.energy_drift[-1], "ok"))
    for i, (n, d, status) in enumerate(drift_rows):
        order = math.nan
        if i > 0 and status == "ok" and drift_rows[i - 1][2] == "ok":
            dprev = drift_rows[i - 1][1]
            if d > 0 and dprev > 0:
                order = math.log(dprev / d) / math.log(n / drift_rows[i - 1][0])
        rows.append(("energy_drift", "energy", n, n, d, order, status))

    os.makedirs(output_dir, exist_ok=True)
    lines = ["kind,name,n_coarse,n_fine,value,order,status"]
    for kind, name, n1, n2, value, order, status in rows:
        lines.append(f"{kind},{name},{n1},{n2},{_fmt(value)},{_fmt(order)},{status}")
    _atomic_write(os.path.join(output_dir, "convergence.csv"), "\n".join(lines) + "\n")
    return rows


# ---------------------------------------------------------------------------
# built-in invariant suite (`gnvort check`)


def builtin_checks():
    """Fast sanity suite over the core invariants; yields (name, ok, detail)."""
    from .core import Bathymetry, Grid, ScaleParams, depth_field
    from .models import (constant_vorticity_cascade, init_cascade_from_shear,
                         rhs_gn1d_general)
    from .operators import (apply_C, apply_dispersive, apply_T, dx,
                            flux_C, invert_dispersive,
                            level_dispersive_correction)

    results = []
    rng = np.random.default_rng(7)
    grid = Grid.line(128, 2 * np.pi)
    x = grid.x
    scales = ScaleParams(0.3, 0.2, 0.05)
    b = 0.3 * np.sin(x)
    h = 1.0 + 0.1 * np.cos(x) - scales.beta * b

    # depth affinity
    z1, z2 = rng.standard_normal(128), rng.standard_normal(128)
    lhs = depth_field(z1 + z2, b, ScaleParams(0.05, 0.1, 0.05), h_min=-10)
    rhs_ = (depth_field(z1, b, ScaleParams(0.05, 0.1, 0.05), h_min=-10)
            + depth_field(z2, np.zeros_like(b), ScaleParams(0.05, 0.0, 0.05),
                          h_min=-10) - 1.0)
    err = float(np.max(np.abs(lhs - rhs_)))
    results.append(("depth superposition", err < 1e-13, f"err={err:.2e}"))

    # dispersive round trip
    r = rng.standard_normal(128)
    v = invert_dispersive(grid, h, b, r, scales)
    res = float(np.max(np.abs(apply_dispersive(grid, h, b, v, scales) - r)))
    results.append(("dispersive round trip", res <= 1e-10 * np.max(np.abs(r)),
                    f"residual={res:.2e}"))

    # flat-data operator value
    flat = ScaleParams(0.3, 0.0, 0.05)
    tv = apply_T(grid, np.ones(128), np.zeros(128), np.sin(x), flat)
    err = float(np.max(np.abs(tv - np.sin(x) / 3.0)))
    results.append(("flat-data dispersive operator", err < 2e-3, f"err={err:.2e}"))

    # flux identity convergence (order >= 1.9)
    errs = []
    for n in (64, 128, 256):
        g = Grid.line(n, 2 * np.pi)
        xs = g.x
        hh = 1.0 + 0.1 * np.cos(xs)
        vs = 0.2 * np.sin(2 * xs) + 0.05 * np.cos(xs)
        vb = 0.1 * np.cos(xs) + 0.2 * np.sin(xs)
        resid = hh * apply_C(g, hh, vs, vb) * vb - dx(g, flux_C(g, hh, vs, vb))
        errs.append(float(np.max(np.abs(resid))))
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    ok = min(order) >= 1.9
    results.append(("shear flux identity order", ok,
                    f"orders={order[0]:.2f},{order[1]:.2f}"))

    # rest state is a fixed point of the general tier
    gridr = Grid.line(64, 2 * np.pi)
    stater = ModelState.rest(Tier.GN_GENERAL_1D, gridr)
    tend = rhs_gn1d_general(stater, Bathymetry.flat(gridr), ScaleParams(1.0, 0.0, 0.04))
    worst = max(float(np.max(np.abs(a))) for a in tend.arrays().values())
    results.append(("rest state fixed point", worst <= 1e-13, f"max tendency={worst:.2e}"))

    # cascade quadrature against closed forms
    th = np.linspace(0, 1, 33)
    prof = 1.3 * h * (th[:, None] - 0.5)
    vsh, E, F = init_cascade_from_shear(th, prof, h)
    vs_ref, E_ref, F_ref = constant_vorticity_cascade(grid, h, 1.3)
    err = max(float(np.max(np.abs(vsh - vs_ref))), float(np.max(np.abs(E - E_ref))),
              float(np.max(np.abs(F - F_ref))))
    results.append(("cascade quadrature closed forms", err < 5e-3, f"err={err:.2e}"))

    # level correction vanishes at theta = 1/sqrt(3) on flat bottoms
    tstar = level_dispersive_correction(grid, h, np.zeros(128), np.sin(x),
                                        1.0 / np.sqrt(3.0), flat)
    err = float(np.max(np.abs(tstar)))
    results.append(("level correction null at 1/sqrt(3)", err < 1e-14, f"err={err:.2e}"))

    return results


def run_check(quiet: bool = False) -> int:
    ok_all = True
    for name, ok, detail in builtin_checks():
        ok_all &= ok
        if not quiet:
            print(f"{'PASS' if ok else 'FAIL'}: {name} ({detail})")
    return 0 if ok_all else 1


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gnvort",
        description="Shallow-water solver for the vortical Green-Naghdi hierarchy")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default="gnvort_out")
    p_run.add_argument("--quiet", action="store_true")

    p_conv = sub.add_parser("converge", help="grid convergence study")
    p_conv.add_argument("config")
    p_conv.add_argument("--grids", required=True,
                        help="comma-separated point counts, e.g. 128,256,512")
    p_conv.add_argument("--dts", default=None,
                        help="optional comma-separated fixed time steps")
    p_conv.add_argument("--output-dir", default="gnvort_out")
    p_conv.add_argument("--quiet", action="store_true")

    p_check = sub.add_parser("check", help="run the built-in invariant suite")
    p_check.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = parse_config_file(args.config)
            return run_scenario(cfg, args.output_dir, args.quiet)
        if args.command == "converge":
            cfg = parse_config_file(args.config)
            grids = [int(g) for g in args.grids.split(",")]
            dts = [float(d) for d in args.dts.split(",")] if args.dts else None
            rows = convergence_study(cfg, grids, dts, args.output_dir, args.quiet)
            if not args.quiet:
                for row in rows:
                    print(",".join(str(c) for c in row))
            return 0
        return run_check(args.quiet)
    except GnvortError as exc:
        print(f"gnvort: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
