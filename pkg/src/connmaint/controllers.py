"""Nominal field, deviation cost, the three feedback laws, and mission
priority bookkeeping."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .constraints import (
    BarrierParams,
    PriorityTask,
    eval_agg,
    eval_cm,
    eval_nominal,
    eval_str,
    nominal_direction,
)
from .graph import NetworkState
from .solver import SaddleParams, SolveResult, saddle_solve
from .spectrum import SpectralWorkspace


class ControllerKind(enum.Enum):
    DISCONTINUOUS = "dis"
    STRICT = "str"
    AGGREGATE = "agg"


_BARRIER_EVAL = {
    ControllerKind.DISCONTINUOUS: eval_cm,
    ControllerKind.STRICT: eval_str,
    ControllerKind.AGGREGATE: eval_agg,
}


@dataclass(frozen=True)
class MissionState:
    """Which robots have visited their targets and who is prioritized."""

    priority_order: tuple[int, ...]
    reached: tuple[bool, ...]

    @classmethod
    def fresh(cls, priority_order: tuple[int, ...]) -> "MissionState":
        return cls(
            priority_order=tuple(priority_order),
            reached=(False,) * len(priority_order),
        )

    @property
    def current_priority(self) -> int | None:
        for r in self.priority_order:
            if not self.reached[r]:
                return r
        return None

    @property
    def done(self) -> bool:
        return self.current_priority is None


def nominal_field(state: NetworkState, task: PriorityTask) -> np.ndarray:
    """Stacked nominal velocities, each robot at constant speed toward its
    target and zero inside its target radius."""
    u = np.empty(state.size)
    for r in range(state.n):
        u[state.block(r)] = nominal_direction(state, task, r)
    return u


def cost_eval(
    state: NetworkState, u: np.ndarray, task: PriorityTask
) -> tuple[float, np.ndarray]:
    """Squared deviation of the input from the nominal field, with gradient."""
    u = np.asarray(u, dtype=float).ravel()
    residual = u - nominal_field(state, task)
    return float(residual @ residual), 2.0 * residual


def control(
    ws: SpectralWorkspace,
    kind: ControllerKind,
    bp: BarrierParams,
    task: PriorityTask,
    sp: SaddleParams,
    warm: tuple[np.ndarray, np.ndarray] | None = None,
) -> SolveResult:
    """Solve for the input minimizing deviation from the nominal field
    subject to the progress constraint and the chosen barrier constraints.

    Cold starts begin at the nominal field with zero duals, so the solve is
    immediate whenever the constraints are inactive there. Non-convergence is
    reported through the result flag; the caller decides the fallback.
    """
    k_nom = nominal_field(ws.state, task)

    def cost(u: np.ndarray) -> tuple[float, np.ndarray]:
        residual = u - k_nom
        return float(residual @ residual), 2.0 * residual

    barrier = _BARRIER_EVAL[kind]
    producers = [
        lambda u: barrier(ws, u, bp),
        lambda u: eval_nominal(ws.state, u, task),
    ]
    init = warm if (warm is not None and sp.warm_start) else (k_nom, np.zeros(0))
    return saddle_solve(cost, producers, ws.state.size, sp, init=init)


def advance_mission(
    state: NetworkState, mission: MissionState, task: PriorityTask
) -> MissionState:
    """Mark robots sitting inside their target radius as reached.

    Reached flags never clear, so a robot later dragged away by the
    connectivity constraints stays relieved of its mission. Returns the
    input mission unchanged when nothing new was reached.
    """
    reached = list(mission.reached)
    changed = False
    for r in range(state.n):
        if not reached[r] and task.reached(state, r):
            reached[r] = True
            changed = True
    if not changed:
        return mission
    return MissionState(
        priority_order=mission.priority_order, reached=tuple(reached)
    )
