"""Isotropic total variation and equality-constrained TV minimization.

The solver targets::

    min_X  TV(X)   subject to   Phi vec(X) = y

with a first-order primal-dual (Chambolle-Pock / PDHG) iteration. The TV
term is handled through its dual on the pointwise unit ball; the affine
constraint is the primal indicator and is applied as an exact orthogonal
projection (a reduced QR of ``Phi^T`` is computed once per matrix), so every
iterate is feasible up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datacube import devectorize, vectorize
from .errors import ConfigurationError, DataError, DimensionError
from .sensing import SensingMatrix

_TINY = np.finfo(np.float64).tiny


def gradient(x: np.ndarray) -> np.ndarray:
    """Forward differences along both axes, zero past the last row/column.

    Returns an array of shape ``(2,) + x.shape``.
    """
    g = np.zeros((2,) + x.shape)
    g[0, :-1, :] = x[1:, :] - x[:-1, :]
    g[1, :, :-1] = x[:, 1:] - x[:, :-1]
    return g


def gradient_adjoint(p: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`gradient` (negative divergence)."""
    px, pz = p[0], p[1]
    out = np.zeros(px.shape)
    out[:-1, :] -= px[:-1, :]
    out[1:, :] += px[:-1, :]
    out[:, :-1] -= pz[:, :-1]
    out[:, 1:] += pz[:, :-1]
    return out


def tv(x) -> float:
    """Isotropic total variation with Neumann (replicate) boundaries."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"tv expects a 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("tv input contains non-finite values")
    g = gradient(x)
    return float(np.hypot(g[0], g[1]).sum())


@dataclass(frozen=True)
class TvSolverOptions:
    """Knobs for :func:`tv_min_equality`.

    Convergence is tested every ``check_every`` iterations: the iterate must
    satisfy the constraint to ``constraint_tol`` (relative), and both the TV
    value and the primal iterate must have stopped moving to within
    ``objective_tol`` (relative).

    ``step_balance`` is the primal/dual step ratio scale ``s`` in
    ``tau = s / L``, ``sigma = 1 / (s L)``; ``None`` picks the RMS of the
    starting point, which keeps the scheme invariant to the data's units.
    """

    max_inner_iters: int = 2000
    constraint_tol: float = 1e-6
    objective_tol: float = 1e-6
    check_every: int = 25
    power_iters: int = 60
    norm_margin: float = 1.02
    step_balance: float | None = None

    def __post_init__(self):
        if self.max_inner_iters < 1 or self.check_every < 1 or self.power_iters < 1:
            raise ConfigurationError("iteration counts must be >= 1")
        if not (self.constraint_tol > 0 and self.objective_tol > 0):
            raise ConfigurationError("tolerances must be strictly positive")
        if self.norm_margin <= 1.0:
            raise ConfigurationError("norm_margin must exceed 1 for a convergent step size")
        if self.step_balance is not None and not self.step_balance > 0:
            raise ConfigurationError("step_balance must be positive")


@dataclass
class TvSolution:
    x: np.ndarray
    constraint_residual: float
    tv_value: float
    iterations_used: int
    converged: bool
    dual: np.ndarray = field(repr=False)
    # M-metric fixed-point residual ||z_k - z_{k-1}||_M^2 at each checkpoint
    merit_history: list = field(default_factory=list, repr=False)


def _factors(phi: SensingMatrix):
    f = phi.cache.get("range_qr")
    if f is None:
        q, r = np.linalg.qr(phi.entries.T)
        f = phi.cache["range_qr"] = (q, r)
    return f


def _restricted_norm(phi: SensingMatrix, power_iters: int) -> float:
    """Power-method estimate of ||grad P||, P the projector onto null(Phi).

    The iterates never leave the affine set, so only the gradient restricted
    to the null space enters the step-size condition.
    """
    key = ("grad_null_norm", power_iters)
    if key in phi.cache:
        return phi.cache[key]
    q, _ = _factors(phi)
    shape = (phi.n_cols, phi.n_bands)

    def pnull(v):
        return v - q @ (q.T @ v)

    v = pnull(np.random.default_rng(0).standard_normal(phi.n))
    est = 0.0
    for _ in range(power_iters):
        nv = np.linalg.norm(v)
        if nv == 0.0:
            break
        v = v / nv
        w = pnull(vectorize(gradient_adjoint(gradient(devectorize(v, *shape)))))
        est = float(np.sqrt(max(np.dot(v, w), 0.0)))
        v = w
    est = est if est > 0 else np.sqrt(8.0)
    phi.cache[key] = est
    return est


def _relative_residual(phi: SensingMatrix, x: np.ndarray, y: np.ndarray) -> float:
    r = phi.entries @ vectorize(x) - y
    return float(np.linalg.norm(r) / max(np.linalg.norm(y), _TINY))


def tv_min_equality(
    phi: SensingMatrix,
    y,
    opts: TvSolverOptions | None = None,
    warm_start=None,
    dual_start=None,
    checkpoint_callback=None,
) -> TvSolution:
    """Minimize isotropic TV over ``{X : Phi vec(X) = y}``.

    Parameters
    ----------
    phi : SensingMatrix
        Row sensing matrix; its QR factors and step-size estimate are cached
        on the object.
    y : array_like, shape (M,)
        Right-hand side.
    opts : TvSolverOptions, optional
    warm_start : array_like, shape (n_cols, n_bands), optional
        Initial primal point. It is projected onto the constraint set first.
    dual_start : array_like, shape (2, n_cols, n_bands), optional
        Initial dual field (pointwise in the unit ball). Zero by default.
    checkpoint_callback : callable, optional
        Called as ``f(iteration, x, merit)`` at every convergence check.

    Returns
    -------
    TvSolution
        On non-convergence ``converged`` is False and ``x`` is the checkpoint
        iterate with the lowest TV seen (all iterates are feasible).
    """
    opts = opts or TvSolverOptions()
    y = np.asarray(y, dtype=np.float64)
    shape = (phi.n_cols, phi.n_bands)
    if y.shape != (phi.m,):
        raise DimensionError(f"measurement vector shape {y.shape} != ({phi.m},)")
    if not np.all(np.isfinite(y)):
        raise DataError("measurements contain non-finite values")

    q, r = _factors(phi)
    x_part = q @ np.linalg.solve(r.T, y)

    def project(v):
        v = vectorize(v)
        return devectorize(v - q @ (q.T @ v) + x_part, *shape)

    if warm_start is None:
        x = devectorize(x_part, *shape)
    else:
        w = np.asarray(warm_start, dtype=np.float64)
        if w.shape != shape:
            raise DimensionError(f"warm start shape {w.shape} != {shape}")
        x = project(w)
    if dual_start is None:
        p = np.zeros((2,) + shape)
    else:
        p = np.array(dual_start, dtype=np.float64)
        if p.shape != (2,) + shape:
            raise DimensionError(f"dual start shape {p.shape} != {(2,) + shape}")
        p /= np.maximum(1.0, np.hypot(p[0], p[1]))

    lip = _restricted_norm(phi, opts.power_iters) * opts.norm_margin
    s = opts.step_balance
    if s is None:
        s = float(np.sqrt(np.mean(x**2)))
        if s == 0.0:
            s = 1.0
    tau, sigma = s / lip, 1.0 / (s * lip)

    tv_prev = tv(x)
    best_x, best_tv = x, tv_prev
    merits = []
    converged = False
    it = 0
    while it < opts.max_inner_iters:
        it += 1
        x_new = project(x - tau * gradient_adjoint(p))
        dx = x_new - x
        q_dual = p + sigma * gradient(x_new + dx)
        p_new = q_dual / np.maximum(1.0, np.hypot(q_dual[0], q_dual[1]))
        if it % opts.check_every == 0 or it == opts.max_inner_iters:
            dp = p_new - p
            merit = float(
                (dx**2).sum() / tau + (dp**2).sum() / sigma - 2.0 * (gradient(dx) * dp).sum()
            )
            merits.append(merit)
            tv_now = tv(x_new)
            if tv_now < best_tv:
                best_x, best_tv = x_new, tv_now
            xnorm = np.linalg.norm(x_new)
            scale = opts.objective_tol * xnorm
            if checkpoint_callback is not None:
                checkpoint_callback(it, x_new, merit)
            if (
                abs(tv_now - tv_prev) <= opts.objective_tol * max(tv_now, scale)
                and np.linalg.norm(dx) <= opts.objective_tol * max(xnorm, _TINY)
                and _relative_residual(phi, x_new, y) <= opts.constraint_tol
            ):
                x, p = x_new, p_new
                converged = True
                break
            tv_prev = tv_now
        x, p = x_new, p_new

    if converged:
        out, out_tv = x, tv(x)
    else:
        out, out_tv = best_x, best_tv
    return TvSolution(
        x=out,
        constraint_residual=_relative_residual(phi, out, y),
        tv_value=out_tv,
        iterations_used=it,
        converged=converged,
        dual=p,
        merit_history=merits,
    )
