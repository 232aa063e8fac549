"""Command-line entry point: ``pbcs synth|acquire|reconstruct|sweep|export``.

Exit codes: 0 success, 2 usage or configuration, 3 I/O, 4 format or data,
5 convergence failure.
"""

from __future__ import annotations

import argparse
import logging
import secrets
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datacube import DataCube
from .errors import IO_EXIT_CODE, PbcsError, UsageError
from .iofmt import (
    LAYOUTS,
    RawCubeSpec,
    SyntheticCubeSpec,
    export_band_image,
    generate_synthetic_cube,
    load_cube,
    read_measurements,
    read_raw_cube,
    save_cube,
    write_history_csv,
    write_measurements,
    write_raw_cube,
    write_results_csv,
)
from .itv import ItvOptions, baseline_report, initial_reconstruction, itv_reconstruct
from .metrics import mse
from .predict import PredictorKind
from .sensing import SensingConfig, acquire
from .tvmin import TvSolverOptions

log = logging.getLogger("pbcs")

DEFAULT_PERCENTAGES = (10.0, 20.0, 30.0, 40.0, 50.0)


def parse_shape(text: str) -> tuple[int, int, int]:
    """``"16x16x8"`` -> ``(16, 16, 8)`` (rows x columns x bands)."""
    parts = text.lower().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected ROWSxCOLSxBANDS") from None
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected three positive integers")
    return dims


def parse_window(text: str):
    """``"0:8,0:16,:"`` -> per-axis zero-based half-open ranges (None keeps an axis)."""
    axes = text.split(",")
    if len(axes) != 3:
        raise argparse.ArgumentTypeError(f"bad window {text!r}, expected three comma-separated ranges")
    out = []
    for a in axes:
        a = a.strip()
        if a in ("", ":"):
            out.append(None)
            continue
        try:
            lo, hi = (int(v) for v in a.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {a!r} in window {text!r}") from None
        out.append((lo, hi))
    return tuple(out)


def parse_percentages(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad percentage list {text!r}") from None
    for v in vals:
        _check_percent(v)
    return vals


def parse_methods(text: str) -> tuple[str, ...]:
    vals = tuple(v.strip() for v in text.split(",") if v.strip())
    if not vals or any(v not in ("tv", "itv") for v in vals):
        raise argparse.ArgumentTypeError(f"methods must be a non-empty subset of tv,itv, got {text!r}")
    return vals


def _check_percent(p: float):
    if not 0.0 < p < 100.0:
        raise UsageError(f"measurement percentage must lie strictly between 0 and 100, got {p}")


def m_from_percent(p: float, n: int) -> int:
    """Measurements per row for ``p`` percent of ``n`` samples, clamped to ``[1, n-1]``."""
    _check_percent(p)
    return min(max(int(round(p / 100.0 * n)), 1), n - 1)


def _seed(value, what):
    if value is None:
        value = secrets.randbits(63)
        print(f"{what} seed: {value}")
    return value


def _raw_spec(args, crop=None) -> RawCubeSpec:
    return RawCubeSpec(args.layout, args.dtype, args.endian, *args.shape, crop=crop)


def _load_input_cube(path, args, crop=None) -> DataCube:
    if str(path).endswith(".npy"):
        cube = load_cube(path)
        if crop is not None:
            cube = DataCube(cube.samples[tuple(slice(*r) if r else slice(None) for r in crop)])
        return cube
    if args.shape is None:
        raise UsageError("--shape is required for raw cube files")
    return read_raw_cube(path, _raw_spec(args, crop))


def _solver_options(args) -> ItvOptions:
    initial = TvSolverOptions(
        max_inner_iters=args.max_inner, constraint_tol=args.constraint_tol, objective_tol=args.objective_tol
    )
    error = TvSolverOptions(
        max_inner_iters=args.max_inner_error, constraint_tol=args.constraint_tol, objective_tol=args.objective_tol
    )
    return ItvOptions(
        max_outer_iters=args.max_outer,
        outer_tol=args.outer_tol,
        initial_solver=initial,
        error_solver=error,
        predictor=PredictorKind.parse(args.predictor),
        jobs=args.jobs,
    )


def cmd_synth(args):
    seed = _seed(args.seed, "synthetic cube")
    spec = SyntheticCubeSpec(args.shape, seed, args.regions, args.drift, tuple(args.amplitude))
    cube = generate_synthetic_cube(spec)
    write_raw_cube(cube, args.out, args.layout, args.dtype, args.endian)
    nr, nc, nb = cube.shape
    print(f"wrote {args.out}: {nr} rows x {nc} columns x {nb} bands, {args.layout}/{args.dtype}/{args.endian}")


def cmd_acquire(args):
    cube = _load_input_cube(args.cube, args, args.window)
    n = cube.n_cols * cube.n_bands
    m = m_from_percent(args.m_percent, n)
    seed = _seed(args.seed, "sensing")
    ms = acquire(cube, SensingConfig(m, seed, cube.n_cols, cube.n_bands))
    write_measurements(ms, args.out)
    print(f"wrote {args.out}: {cube.n_rows} rows, M={m} of N={n} ({100.0 * m / n:.4g}%)")


def cmd_reconstruct(args):
    ms = read_measurements(args.measurements)
    opts = _solver_options(args)
    truth = None
    if args.truth is not None:
        if args.shape is None and not str(args.truth).endswith(".npy"):
            args.shape = ms.cube_shape
        truth = _load_input_cube(args.truth, args, args.window)

    t0 = time.perf_counter()
    if args.method == "tv":
        est = initial_reconstruction(ms, opts)
        summary = "tv"
        history = None
    else:
        report = itv_reconstruct(ms, opts, truth)
        est = report.cube_estimate
        history = report
        summary = f"itv: {report.outer_iterations_used} outer iterations, stop: {report.stop_reason}"
    elapsed = time.perf_counter() - t0

    save_cube(est, args.out)
    if args.report is not None:
        if history is None:
            history = baseline_report(ms, est, truth)
        write_history_csv(history, args.report)
    line = f"wrote {args.out} ({summary}, {elapsed:.2f}s)"
    if truth is not None:
        line += f", MSE {mse(est, truth):.6g}"
    print(line)


@dataclass(frozen=True)
class SweepPlan:
    percentages: tuple[float, ...] = DEFAULT_PERCENTAGES
    methods: tuple[str, ...] = ("tv", "itv")
    repetitions: int = 1
    master_seed: int = 0
    windows: tuple = (None,)

    def __post_init__(self):
        if not self.methods:
            raise UsageError("a sweep needs at least one method")
        for p in self.percentages:
            _check_percent(p)
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")


def _sweep_cell(cube_samples, percent, rep, master_seed, methods, opts):
    """One (window, percentage, repetition) cell; returns {method: (mse, iters, seconds)}."""
    cube = DataCube(cube_samples)
    n = cube.n_cols * cube.n_bands
    m = m_from_percent(percent, n)
    ms = acquire(cube, SensingConfig(m, master_seed + rep, cube.n_cols, cube.n_bands))
    out = {}
    t0 = time.perf_counter()
    init = initial_reconstruction(ms, opts)
    t_tv = time.perf_counter() - t0
    if "tv" in methods:
        out["tv"] = (mse(init, cube), 0, t_tv)
    if "itv" in methods:
        t1 = time.perf_counter()
        rep_ = itv_reconstruct(ms, opts, cube, initial=init)
        out["itv"] = (rep_.final_mse, rep_.outer_iterations_used, t_tv + time.perf_counter() - t1)
    return m, out


def run_sweep(windows: list[DataCube], plan: SweepPlan, opts: ItvOptions, jobs: int = 1) -> list[dict]:
    """Run every (percentage, repetition) cell on every window and average MSE over windows."""
    cells = [(w, p, r) for p in plan.percentages for r in range(plan.repetitions) for w in range(len(windows))]
    args = [(windows[w].samples, p, r, plan.master_seed, plan.methods, opts) for w, p, r in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, *zip(*args)))
    else:
        results = [_sweep_cell(*a) for a in args]

    rows = []
    k = 0
    for p in plan.percentages:
        for r in range(plan.repetitions):
            group = results[k:k + len(windows)]
            k += len(windows)
            for method in plan.methods:
                vals = [g[1][method] for g in group]
                rows.append(dict(
                    m_percent=p,
                    method=method,
                    mse=float(np.mean([v[0] for v in vals])),
                    iterations=int(max(v[1] for v in vals)),
                    wall_seconds=float(sum(v[2] for v in vals)),
                    repetition=r,
                    m=group[0][0],
                ))
    return rows


def cmd_sweep(args):
    windows = [_load_input_cube(args.cube, args, w) for w in (args.window or [None])]
    shapes = {(w.n_cols, w.n_bands) for w in windows}
    if len(shapes) != 1:
        raise UsageError("all windows must share the same column and band extent")
    seed = _seed(args.seed, "sweep master")
    plan = SweepPlan(args.percentages, args.methods, args.repetitions, seed, tuple(args.window or [None]))
    opts = _solver_options(args)
    opts = replace(opts, jobs=1)  # parallelism lives at the cell level
    rows = run_sweep(windows, plan, opts, args.jobs)
    write_results_csv(rows, args.out)
    for r in rows:
        print(f"{r['m_percent']:6.2f}% {r['method']:>3} rep {r['repetition']}: MSE {r['mse']:.6g} ({r['iterations']} it)")


def cmd_export(args):
    cube = _load_input_cube(args.cube, args, args.window)
    export_band_image(cube, args.band, args.out)
    print(f"wrote {args.out}")


def _add_raw_flags(p, shape_required=False):
    p.add_argument("--shape", type=parse_shape, required=shape_required,
                   help="ROWSxCOLSxBANDS of the raw file (not needed for .npy)")
    p.add_argument("--layout", choices=LAYOUTS, default="bsq")
    p.add_argument("--dtype", choices=("int16", "uint16"), default="uint16")
    p.add_argument("--endian", choices=("little", "big"), default="little")


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--max-outer", type=int, default=50, help="ITV outer iteration cap")
    g.add_argument("--outer-tol", type=float, default=1e-4, help="relative cube change that stops ITV")
    g.add_argument("--max-inner", type=int, default=2000, help="iteration cap of the per-row TV solves")
    g.add_argument("--max-inner-error", type=int, default=500, help="iteration cap of the error solves")
    g.add_argument("--constraint-tol", type=float, default=1e-6)
    g.add_argument("--objective-tol", type=float, default=1e-6)
    g.add_argument("--predictor", default="midpoint", help="midpoint (default); 'ls' is reserved")
    g.add_argument("--jobs", type=int, default=1, help="worker count")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pbcs", description="Pushbroom compressed sensing with ITV reconstruction.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic raw cube")
    p.add_argument("--shape", type=parse_shape, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--drift", type=float, default=0.05)
    p.add_argument("--regions", type=int, default=4)
    p.add_argument("--amplitude", type=int, nargs=2, default=(500, 4000), metavar=("LO", "HI"))
    p.add_argument("--layout", choices=LAYOUTS, default="bsq")
    p.add_argument("--dtype", choices=("int16", "uint16"), default="uint16")
    p.add_argument("--endian", choices=("little", "big"), default="little")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("acquire", help="sense every spectral row of a cube")
    p.add_argument("cube", type=Path)
    _add_raw_flags(p)
    p.add_argument("--window", type=parse_window, help="crop, e.g. 0:8,:,0:4")
    p.add_argument("--m-percent", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("reconstruct", help="reconstruct a cube from a measurement file")
    p.add_argument("measurements", type=Path)
    p.add_argument("--method", choices=("tv", "itv"), default="itv")
    p.add_argument("--truth", type=Path, help="reference cube (raw or .npy) for MSE reporting")
    _add_raw_flags(p)
    p.add_argument("--window", type=parse_window, help="crop applied to --truth")
    _add_solver_flags(p)
    p.add_argument("-o", "--out", type=Path, required=True, help="estimate (.npy)")
    p.add_argument("--report", type=Path, help="per-iteration CSV")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="MSE versus measurement rate")
    p.add_argument("cube", type=Path)
    _add_raw_flags(p)
    p.add_argument("--window", type=parse_window, action="append",
                   help="crop window; repeat to average over several")
    p.add_argument("--percentages", type=parse_percentages, default=DEFAULT_PERCENTAGES)
    p.add_argument("--methods", type=parse_methods, default=("tv", "itv"))
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--seed", type=int, help="master seed; repetition r uses seed + r")
    _add_solver_flags(p)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="write one band as a grayscale PNG")
    p.add_argument("cube", type=Path)
    _add_raw_flags(p)
    p.add_argument("--window", type=parse_window)
    p.add_argument("--band", type=int, required=True)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except PbcsError as exc:
        print(f"pbcs: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"pbcs: I/O error: {exc}", file=sys.stderr)
        return IO_EXIT_CODE
    return 0


if __name__ == "__main__":
    sys.exit(main())
