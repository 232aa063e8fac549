"""Iterative TV (ITV) reconstruction of a row-sensed cube.

Every row is first reconstructed on its own by TV minimization. Each outer
iteration then predicts every row from its neighbours in the previous
iterate, subtracts the prediction's measurements, reconstructs only the
prediction error, and adds it back. Rows of one iteration read only the
previous iterate, so processing order does not matter and rows can run on a
thread pool.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datacube import DataCube
from .errors import ConfigurationError, ConvergenceError, DimensionError
from .metrics import mse
from .predict import PredictorKind, predict_from_cube, prediction_error_measurements
from .sensing import MeasurementSet, SensingMatrix
from .tvmin import TvSolverOptions, tv_min_equality, _relative_residual

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ItvOptions:
    max_outer_iters: int = 50
    outer_tol: float = 1e-4
    initial_solver: TvSolverOptions = field(default_factory=TvSolverOptions)
    error_solver: TvSolverOptions = field(
        default_factory=lambda: TvSolverOptions(max_inner_iters=500)
    )
    predictor: PredictorKind = PredictorKind.MIDPOINT
    # consecutive increases of the change metric that abort the run
    divergence_patience: int = 3
    jobs: int = 1

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ConfigurationError("max_outer_iters must be >= 1")
        if not self.outer_tol > 0:
            raise ConfigurationError("outer_tol must be positive")
        if self.divergence_patience < 1 or self.jobs < 1:
            raise ConfigurationError("divergence_patience and jobs must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    relative_change: float  # NaN for iteration 0
    mean_residual: float
    mse: float | None
    unconverged_rows: int


@dataclass
class ReconstructionReport:
    cube_estimate: DataCube
    history: list[IterationRecord]
    outer_iterations_used: int
    converged: bool
    stop_reason: str = ""
    final_mse: float | None = None  # of cube_estimate; None without ground truth

    @property
    def initial_mse(self):
        return self.history[0].mse


def _solve_rows(fn, rows, jobs):
    if jobs == 1:
        return [fn(i) for i in rows]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, rows))


def _matrices(ms: MeasurementSet) -> list[SensingMatrix]:
    return [ms.sensing_matrix(i) for i in range(ms.n_rows)]


def _initial(ms, solver, mats, jobs):
    def one(i):
        return tv_min_equality(mats[i], ms.y[i], solver)

    sols = _solve_rows(one, range(ms.n_rows), jobs)
    failed = [i for i, s in enumerate(sols) if not s.converged]
    if failed:
        log.warning("initial TV solve did not converge on rows %s", failed)
        if len(failed) == ms.n_rows:
            raise ConvergenceError("initial TV reconstruction failed on every row")
    return np.stack([s.x for s in sols]), sols


def initial_reconstruction(ms: MeasurementSet, opts: ItvOptions | None = None) -> DataCube:
    """Independent per-row TV reconstruction (the plain "TV" baseline).

    Rows whose solve does not converge keep their best iterate and are
    logged; :class:`ConvergenceError` is raised only if every row fails.
    """
    opts = opts or ItvOptions()
    samples, _ = _initial(ms, opts.initial_solver, _matrices(ms), opts.jobs)
    return DataCube(samples)


def baseline_report(ms: MeasurementSet, cube: DataCube, ground_truth: DataCube | None = None) -> ReconstructionReport:
    """Single-entry report for a plain per-row TV reconstruction."""
    rec = IterationRecord(
        0, float("nan"), _mean_residual(_matrices(ms), cube.samples, ms.y),
        None if ground_truth is None else mse(cube, ground_truth), 0,
    )
    return ReconstructionReport(cube, [rec], 0, True, "tv", rec.mse)


def _mean_residual(mats, samples, y):
    return float(np.mean([_relative_residual(m, samples[i], y[i]) for i, m in enumerate(mats)]))


def _relative_change(new, old):
    den = np.linalg.norm(old)
    num = np.linalg.norm(new - old)
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(num / den)


def itv_reconstruct(
    ms: MeasurementSet,
    opts: ItvOptions | None = None,
    ground_truth: DataCube | None = None,
    *,
    initial: DataCube | None = None,
    progress=None,
    row_order=None,
) -> ReconstructionReport:
    """Run ITV until the relative cube change drops below ``opts.outer_tol``.

    Parameters
    ----------
    ms : MeasurementSet
    opts : ItvOptions, optional
    ground_truth : DataCube, optional
        When given, every history entry carries the MSE against it.
    initial : DataCube, optional
        Replaces the per-row TV initialization (e.g. to start from a known
        cube).
    progress : callable, optional
        Called as ``progress(iteration, relative_change, elapsed_seconds)``
        after each outer iteration.
    row_order : sequence of int, optional
        Order in which rows are visited inside an iteration. Results do not
        depend on it; it exists so that property can be checked.
    """
    opts = opts or ItvOptions()
    shape = ms.cube_shape
    if ground_truth is not None and ground_truth.shape != shape:
        raise DimensionError(f"ground truth shape {ground_truth.shape} != {shape}")
    order = list(range(ms.n_rows)) if row_order is None else list(row_order)
    if sorted(order) != list(range(ms.n_rows)):
        raise ConfigurationError("row_order must be a permutation of the row indices")

    t0 = time.perf_counter()
    mats = _matrices(ms)
    y = ms.y

    def _mse(samples):
        return None if ground_truth is None else mse(DataCube(samples), ground_truth)

    if initial is None:
        current, sols = _initial(ms, opts.initial_solver, mats, opts.jobs)
        unconv = sum(not s.converged for s in sols)
    else:
        if initial.shape != shape:
            raise DimensionError(f"initial cube shape {initial.shape} != {shape}")
        current, unconv = np.array(initial.samples), 0

    history = [IterationRecord(0, float("nan"), _mean_residual(mats, current, y), _mse(current), unconv)]
    iterates = [current]
    err_x = [np.zeros(shape[1:]) for _ in range(ms.n_rows)]
    err_dual = [None] * ms.n_rows
    converged = False
    stop_reason = "max_outer_iters"
    rises = 0
    n = 0

    while n < opts.max_outer_iters:
        n += 1
        prev = current

        def refine(i):
            f_p = predict_from_cube(prev, i, opts.predictor)
            e_y = prediction_error_measurements(y[i], mats[i], f_p)
            sol = tv_min_equality(
                mats[i], e_y, opts.error_solver, warm_start=err_x[i], dual_start=err_dual[i]
            )
            return i, f_p + sol.x, sol

        nxt = np.empty_like(prev)
        unconv = 0
        for i, new_row, sol in _solve_rows(refine, order, opts.jobs):
            nxt[i] = new_row
            err_x[i], err_dual[i] = sol.x, sol.dual
            unconv += not sol.converged
        current = nxt
        change = _relative_change(current, prev)
        history.append(IterationRecord(n, change, _mean_residual(mats, current, y), _mse(current), unconv))
        iterates.append(current)
        if progress is not None:
            progress(n, change, time.perf_counter() - t0)
        log.debug("ITV iteration %d: relative change %.3e", n, change)

        if change < opts.outer_tol:
            converged = True
            stop_reason = "outer_tol"
            break
        if n >= 2 and change > history[-2].relative_change:
            rises += 1
        else:
            rises = 0
        if rises >= opts.divergence_patience:
            stop_reason = "diverging"
            break

    if stop_reason == "diverging":
        best = _best_iterate(history, opts.error_solver.constraint_tol)
        log.warning("ITV change grew %d times in a row; returning iterate %d", rises, best)
        estimate = iterates[best]
    else:
        estimate = current

    return ReconstructionReport(
        cube_estimate=DataCube(estimate),
        history=history,
        outer_iterations_used=n,
        converged=converged,
        stop_reason=stop_reason,
        final_mse=_mse(estimate),
    )


def _best_iterate(history, tol):
    """Index of the iterate to fall back on when the run diverges.

    Lowest mean constraint residual wins. Residuals already within ``tol``
    count as tied (iterates are projected onto the constraint set, so they
    are all at rounding level); ties go to the iterate reached by the
    smallest change.
    """

    def key(rec):
        res = max(rec.mean_residual, tol)
        change = rec.relative_change if rec.iteration > 0 else float("inf")
        return (res, change)

    return min(range(len(history)), key=lambda k: key(history[k]))
