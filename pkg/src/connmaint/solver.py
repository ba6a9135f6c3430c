"""Projected saddle-point dynamics for the per-state convex programs.

The continuous-time flow (primal gradient descent, dual gradient ascent
projected onto the nonnegative orthant) is discretized by explicit Euler
with a fixed step. Stopping is governed by a combined KKT residual:
stationarity in the infinity norm, worst primal violation, and worst
complementarity product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constraints import ConstraintEval, concat_evals

CostFn = Callable[[np.ndarray], tuple[float, np.ndarray]]
ConstraintFn = Callable[[np.ndarray], ConstraintEval]


class SolverDivergence(RuntimeError):
    """Iterates left the finite range; the step size is too large."""


@dataclass(frozen=True)
class SaddleParams:
    step: float = 1e-2
    max_iters: int = 20000
    kkt_tol: float = 1e-5
    warm_start: bool = True

    def __post_init__(self) -> None:
        if self.step <= 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.kkt_tol <= 0.0:
            raise ValueError(f"kkt_tol must be positive, got {self.kkt_tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class SolveResult:
    u_star: np.ndarray
    duals: np.ndarray
    kkt_residual: float
    iters: int
    converged: bool
    labels: tuple[str, ...] = ()


def _evaluate(u: np.ndarray, constraints: Sequence[ConstraintFn]) -> ConstraintEval:
    evals = [fn(u) for fn in constraints]
    if not evals:
        return ConstraintEval.empty(u.size)
    return concat_evals(evals)


def _residual(grad_cost: np.ndarray, ev: ConstraintEval, duals: np.ndarray) -> float:
    stationarity = grad_cost + ev.grad_u.T @ duals if len(ev) else grad_cost
    res = float(np.max(np.abs(stationarity)))
    if len(ev):
        res = max(res, float(np.max(np.maximum(ev.values, 0.0))))
        res = max(res, float(np.max(np.abs(duals * ev.values))))
    return res


def kkt_residual(
    u: np.ndarray,
    duals: np.ndarray,
    cost: CostFn,
    constraints: Sequence[ConstraintFn],
) -> float:
    """Stationarity / feasibility / complementarity max-residual at (u, duals)."""
    u = np.asarray(u, dtype=float).ravel()
    duals = np.asarray(duals, dtype=float).ravel()
    ev = _evaluate(u, constraints)
    if duals.size != len(ev):
        raise ValueError(f"got {duals.size} duals for {len(ev)} constraint entries")
    _, grad_cost = cost(u)
    return _residual(grad_cost, ev, duals)


def saddle_solve(
    cost: CostFn,
    constraints: Sequence[ConstraintFn],
    n_inputs: int,
    params: SaddleParams,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> SolveResult:
    """Run the projected saddle-point iteration until the KKT residual
    drops below the tolerance or the iteration budget is exhausted.

    ``init`` warm-starts the primal/dual pair; extra warm duals are dropped
    and missing ones start at zero, so the entry count may change between
    consecutive states. Non-convergence is reported through the ``converged``
    flag; only non-finite iterates raise.

    Nonsmooth constraint entries make the iteration orbit saddle points
    where the minimizing eigenvector is not unique, so the single-element
    residual cannot reach the tolerance there. A converged run returns the
    final iterate; a non-converged run returns the tail average of the
    iterates (restarted at power-of-two counts), which sits at the orbit
    center, with the residual re-measured at that point.
    """
    u = np.zeros(n_inputs)
    duals0: np.ndarray | None = None
    if init is not None:
        u = np.array(init[0], dtype=float).ravel()
        if u.size != n_inputs:
            raise ValueError(f"init has {u.size} inputs, expected {n_inputs}")
        duals0 = np.asarray(init[1], dtype=float).ravel()

    ev = _evaluate(u, constraints)
    duals = np.zeros(len(ev))
    if duals0 is not None:
        take = min(duals0.size, duals.size)
        duals[:take] = np.maximum(duals0[:take], 0.0)

    eta = params.step
    iters = 0
    avg_u = u.copy()
    avg_duals = duals.copy()
    avg_count = 1
    next_restart = 2
    _, grad_cost = cost(u)
    res = _residual(grad_cost, ev, duals)
    while res > params.kkt_tol and iters < params.max_iters:
        # overflow here is how divergence manifests; the finiteness check below
        # turns it into a diagnostic
        with np.errstate(over="ignore", invalid="ignore"):
            lagrangian_grad = grad_cost + ev.grad_u.T @ duals if len(ev) else grad_cost
            u = u - eta * lagrangian_grad
            duals = np.maximum(0.0, duals + eta * ev.values)
        if not np.all(np.isfinite(u)):
            raise SolverDivergence(
                f"non-finite iterate after {iters + 1} steps; reduce step {eta}"
            )
        iters += 1
        if iters == next_restart:
            avg_u = u.copy()
            avg_duals = duals.copy()
            avg_count = 1
            next_restart *= 2
        else:
            avg_count += 1
            avg_u += (u - avg_u) / avg_count
            avg_duals += (duals - avg_duals) / avg_count
        ev = _evaluate(u, constraints)
        _, grad_cost = cost(u)
        res = _residual(grad_cost, ev, duals)

    if res <= params.kkt_tol:
        return SolveResult(
            u_star=u,
            duals=duals,
            kkt_residual=res,
            iters=iters,
            converged=True,
            labels=ev.labels,
        )
    ev_avg = _evaluate(avg_u, constraints)
    _, grad_avg = cost(avg_u)
    return SolveResult(
        u_star=avg_u,
        duals=avg_duals,
        kkt_residual=_residual(grad_avg, ev_avg, avg_duals),
        iters=iters,
        converged=False,
        labels=ev_avg.labels,
    )
