"""Barrier and priority constraint evaluators in residual form g(x, u) <= 0.

Each evaluator returns the constraint values together with one (sub)gradient
row per entry, which is exactly what the saddle-point solver consumes. The
three barrier variants differ in which eigenspace the worst-case eigenvalue
rate is minimized over: the bare eigenspace of the connectivity eigenvalue
(discontinuous baseline), the merged span of all nonzero-eigenvalue
eigenspaces (strict), or one entry per merged block 2..m (aggregate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NetworkState
from .spectrum import SpectralWorkspace


@dataclass(frozen=True)
class BarrierParams:
    """Connectivity threshold and the slope of the linear class-K function."""

    epsilon: float
    alpha_slope: float = 1.0

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.alpha_slope <= 0.0:
            raise ValueError(f"alpha_slope must be positive, got {self.alpha_slope}")

    def alpha(self, value: float) -> float:
        return self.alpha_slope * value


@dataclass(frozen=True)
class PriorityTask:
    """Target assignment with one prioritized robot.

    priority: index of the robot whose progress constraint is enforced, or
        None once every target has been visited.
    targets: flat target vector with the same layout as the state positions.
    k_frac: fraction of the nominal squared speed the prioritized robot must
        realize along its nominal direction (0 < k_frac < 1).
    """

    priority: int | None
    targets: np.ndarray
    target_radius: float
    v_nom: float
    k_frac: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "targets", np.asarray(self.targets, dtype=float).ravel()
        )
        if not 0.0 < self.k_frac < 1.0:
            raise ValueError(f"k_frac must lie in (0, 1), got {self.k_frac}")
        if self.target_radius <= 0.0:
            raise ValueError(f"target_radius must be positive, got {self.target_radius}")
        if self.v_nom < 0.0:
            raise ValueError(f"v_nom must be nonnegative, got {self.v_nom}")

    def with_priority(self, priority: int | None) -> "PriorityTask":
        return PriorityTask(
            priority=priority,
            targets=self.targets,
            target_radius=self.target_radius,
            v_nom=self.v_nom,
            k_frac=self.k_frac,
        )

    def error(self, state: NetworkState, r: int) -> np.ndarray:
        block = state.block(r)
        return self.targets[block] - state.positions[block]

    def reached(self, state: NetworkState, r: int) -> bool:
        return bool(np.linalg.norm(self.error(state, r)) <= self.target_radius)


@dataclass(frozen=True)
class ConstraintEval:
    """Constraint residuals (feasible iff every value <= 0) with gradients."""

    values: np.ndarray
    grad_u: np.ndarray
    labels: tuple[str, ...]

    @classmethod
    def empty(cls, n_inputs: int) -> "ConstraintEval":
        return cls(
            values=np.zeros(0),
            grad_u=np.zeros((0, n_inputs)),
            labels=(),
        )

    def __len__(self) -> int:
        return self.values.size


def concat_evals(evals: list[ConstraintEval]) -> ConstraintEval:
    return ConstraintEval(
        values=np.concatenate([e.values for e in evals]),
        grad_u=np.vstack([e.grad_u for e in evals]),
        labels=tuple(lbl for e in evals for lbl in e.labels),
    )


def eval_cm(ws: SpectralWorkspace, u: np.ndarray, bp: BarrierParams) -> ConstraintEval:
    """Baseline connectivity constraint over the bare connectivity eigenspace.

    Discontinuous in the state by design; used only by the baseline
    controller.
    """
    lo, hi = ws.multiplicity_block(2)
    bound = ws.block_bound(u, lo, hi)
    margin = bp.alpha(float(ws.eigenvalues[1]) - bp.epsilon)
    return ConstraintEval(
        values=np.array([-bound.mu - margin]),
        grad_u=-bound.grad_u[None, :],
        labels=("cm",),
    )


def eval_str(ws: SpectralWorkspace, u: np.ndarray, bp: BarrierParams) -> ConstraintEval:
    """Strict connectivity constraint over the full merged nonzero block."""
    bound = ws.merged_bound(u, ws.n)
    margin = bp.alpha(float(ws.eigenvalues[1]) - bp.epsilon)
    return ConstraintEval(
        values=np.array([-bound.mu - margin]),
        grad_u=-bound.grad_u[None, :],
        labels=("str",),
    )


def eval_agg(ws: SpectralWorkspace, u: np.ndarray, bp: BarrierParams) -> ConstraintEval:
    """Aggregate connectivity constraints, one entry per merged block 2..m."""
    n = ws.n
    form = ws.reduced_form(u)
    values = np.empty(n - 1)
    grads = np.empty((n - 1, ws.state.size))
    for m in range(2, n + 1):
        bound = ws.merged_bound(u, m, form=form)
        margin = bp.alpha(float(ws.eigenvalues[m - 1]) - bp.epsilon)
        values[m - 2] = -bound.mu - margin
        grads[m - 2] = -bound.grad_u
    labels = tuple(f"agg{m}" for m in range(2, n + 1))
    return ConstraintEval(values=values, grad_u=grads, labels=labels)


def nominal_direction(state: NetworkState, task: PriorityTask, r: int) -> np.ndarray:
    """Per-robot nominal velocity: constant speed toward the target.

    Zero once the robot sits within its target radius, which also removes
    the unit-vector singularity at the target point.
    """
    err = task.error(state, r)
    dist = float(np.linalg.norm(err))
    if dist <= task.target_radius:
        return np.zeros_like(err)
    return task.v_nom * err / dist


def eval_nominal(
    state: NetworkState, u: np.ndarray, task: PriorityTask
) -> ConstraintEval:
    """Progress constraint for the prioritized robot.

    Requires the prioritized robot's input to realize at least a k_frac
    fraction of the nominal squared speed along the nominal direction. Empty
    (always feasible) when no robot is prioritized or the prioritized robot
    already sits inside its target radius.
    """
    u = np.asarray(u, dtype=float).ravel()
    if task.priority is None or task.reached(state, task.priority):
        return ConstraintEval.empty(state.size)
    p = task.priority
    u_nom_p = nominal_direction(state, task, p)
    block = state.block(p)
    value = task.k_frac * task.v_nom**2 - float(u_nom_p @ u[block])
    grad = np.zeros((1, state.size))
    grad[0, block] = -u_nom_p
    return ConstraintEval(values=np.array([value]), grad_u=grad, labels=("nom",))


def probe_candidate(state: NetworkState, task: PriorityTask) -> np.ndarray:
    """Candidate control certifying strict feasibility.

    The prioritized robot follows its nominal velocity; every other robot
    moves toward the prioritized robot at the nominal speed. All zero when
    no robot is prioritized.
    """
    u = np.zeros(state.size)
    if task.priority is None or task.reached(state, task.priority):
        return u
    p = task.priority
    u[state.block(p)] = nominal_direction(state, task, p)
    x_p = state.robot(p)
    for r in range(state.n):
        if r == p:
            continue
        gap = x_p - state.robot(r)
        dist = float(np.linalg.norm(gap))
        if dist > 0.0:
            u[state.block(r)] = task.v_nom * gap / dist
    return u


def feasibility_breakdown(
    ws: SpectralWorkspace, bp: BarrierParams, task: PriorityTask
) -> ConstraintEval:
    """All constraint entries evaluated at the strict-feasibility candidate."""
    u = probe_candidate(ws.state, task)
    return concat_evals([eval_agg(ws, u, bp), eval_nominal(ws.state, u, task)])


def strict_feasibility_probe(
    ws: SpectralWorkspace, bp: BarrierParams, task: PriorityTask
) -> float:
    """Worst-entry slack of the candidate control; positive certifies that a
    strictly feasible input exists at this state."""
    ev = feasibility_breakdown(ws, bp, task)
    return float(-np.max(ev.values))
