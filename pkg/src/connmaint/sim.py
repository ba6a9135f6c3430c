"""Closed-loop simulation of the single-integrator network with mission
events, trajectory logging, and delimited-text export."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import (
    BarrierParams,
    PriorityTask,
    concat_evals,
    eval_nominal,
    strict_feasibility_probe,
)
from .controllers import (
    ControllerKind,
    MissionState,
    _BARRIER_EVAL,
    advance_mission,
    control,
)
from .graph import GraphError, NetworkState, ProximityConfig
from .solver import SaddleParams
from .spectrum import SpectralWorkspace

# Weighted adjacency entries are exactly zero beyond the cutoff, so a
# disconnected graph shows a connectivity eigenvalue at roundoff level.
DISCONNECT_TOL = 1e-9

# Worst constraint violation an applied input may carry. Near-degenerate
# reduced matrices make the subgradient iteration orbit the optimum without
# meeting the KKT tolerance; such iterates are still near-optimal and safe
# to apply as long as they are feasible to within this bound.
FEASIBILITY_TOL = 1e-3


class ScenarioError(ValueError):
    """Raised for malformed or infeasible scenario descriptions."""


@dataclass(frozen=True)
class Scenario:
    initial_state: NetworkState
    targets: np.ndarray
    priority_order: tuple[int, ...]
    proximity: ProximityConfig
    barrier: BarrierParams
    v_nom: float
    k_frac: float
    target_radius: float
    dt: float
    max_steps: int
    solver: SaddleParams = SaddleParams()

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", np.asarray(self.targets, float).ravel())
        if self.targets.size != self.initial_state.size:
            raise ScenarioError(
                f"targets has {self.targets.size} entries, "
                f"state has {self.initial_state.size}"
            )
        if sorted(self.priority_order) != list(range(self.initial_state.n)):
            raise ScenarioError(
                f"priority order must permute 0..{self.initial_state.n - 1}, "
                f"got {self.priority_order}"
            )
        if self.dt <= 0.0:
            raise ScenarioError(f"dt must be positive, got {self.dt}")
        if self.max_steps < 1:
            raise ScenarioError(f"max_steps must be >= 1, got {self.max_steps}")

    def task(self, priority: int | None) -> PriorityTask:
        return PriorityTask(
            priority=priority,
            targets=self.targets,
            target_radius=self.target_radius,
            v_nom=self.v_nom,
            k_frac=self.k_frac,
        )


@dataclass
class TrajectoryLog:
    """Per-step time series of the closed-loop run.

    ``reason`` is one of 'all_reached', 'max_steps', or 'disconnected'.
    ``flagged`` lists step indices where the solver did not converge and the
    previous input was reused.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    eigenvalues: np.ndarray
    g: np.ndarray
    g_labels: tuple[str, ...]
    priority: np.ndarray
    iters: np.ndarray
    kkt: np.ndarray
    slack: np.ndarray
    reason: str
    flagged: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return self.t.size


def step(state: NetworkState, u: np.ndarray, dt: float) -> NetworkState:
    """Explicit Euler step of the single-integrator dynamics."""
    u = np.asarray(u, dtype=float).ravel()
    if u.size != state.size:
        raise GraphError(f"input has {u.size} entries, state has {state.size}")
    if not np.all(np.isfinite(u)):
        raise GraphError("input must be finite")
    return state.with_positions(state.positions + dt * u)


def _repair_input(u, evaluate, rounds: int = 10):
    """Least-squares correction of an input onto the feasible set.

    Gauss-Newton steps on the violated entries with deterministic
    backtracking; the constraint entries are convex in the input, so small
    enough steps decrease the worst violation.
    """
    ev = evaluate(u)
    for _ in range(rounds):
        worst = float(np.max(ev.values)) if len(ev) else 0.0
        if worst <= 0.0:
            break
        viol = ev.values > 0.0
        du, *_ = np.linalg.lstsq(ev.grad_u[viol], ev.values[viol], rcond=None)
        scale = 1.0
        for _ in range(8):
            cand = u - scale * du
            ev_cand = evaluate(cand)
            if float(np.max(ev_cand.values)) < worst:
                break
            scale *= 0.5
        u, ev = cand, ev_cand
    return u, ev


def _log_labels(kind: ControllerKind, n: int) -> tuple[str, ...]:
    if kind is ControllerKind.AGGREGATE:
        barrier = tuple(f"agg{m}" for m in range(2, n + 1))
    elif kind is ControllerKind.STRICT:
        barrier = ("str",)
    else:
        barrier = ("cm",)
    return barrier + ("nom",)


def run(scenario: Scenario, kind: ControllerKind) -> TrajectoryLog:
    """Simulate the closed loop until all targets are reached, the step
    budget is exhausted, or the graph disconnects.

    Each step evaluates the controller (warm-started from the previous
    step), logs, integrates, and fires mission events. When the solver
    fails to converge the last converged input is reused for one step and
    the step index is flagged. Deterministic for identical scenarios.
    """
    state = scenario.initial_state
    n = state.n
    labels = _log_labels(kind, n)
    base_task = scenario.task(None)

    lam0 = SpectralWorkspace(state, scenario.proximity).eigenvalues
    if lam0[1] < scenario.barrier.epsilon:
        raise ScenarioError(
            f"initial connectivity {lam0[1]:.6g} below threshold "
            f"{scenario.barrier.epsilon:.6g}"
        )

    mission = advance_mission(state, MissionState.fresh(scenario.priority_order), base_task)

    rows_t: list[float] = []
    rows_x: list[np.ndarray] = []
    rows_u: list[np.ndarray] = []
    rows_lam: list[np.ndarray] = []
    rows_g: list[np.ndarray] = []
    rows_p: list[int] = []
    rows_iters: list[int] = []
    rows_kkt: list[float] = []
    rows_slack: list[float] = []
    flagged: list[int] = []

    warm: tuple[np.ndarray, np.ndarray] | None = None
    u_prev: np.ndarray | None = None
    reason = "max_steps"
    barrier_eval = _BARRIER_EVAL[kind]

    for k in range(scenario.max_steps):
        if mission.done:
            reason = "all_reached"
            break
        ws = SpectralWorkspace(state, scenario.proximity)
        if ws.eigenvalues[1] < DISCONNECT_TOL:
            reason = "disconnected"
            break
        task = scenario.task(mission.current_priority)
        result = control(ws, kind, scenario.barrier, task, scenario.solver, warm)

        def evaluate(u_trial):
            return concat_evals(
                [
                    barrier_eval(ws, u_trial, scenario.barrier),
                    eval_nominal(state, u_trial, task),
                ]
            )

        u, ev = _repair_input(result.u_star, evaluate)
        feasible = not len(ev) or float(np.max(ev.values)) <= FEASIBILITY_TOL
        if not feasible and u_prev is not None:
            u = u_prev
            ev = evaluate(u)
        if not (feasible and result.converged):
            flagged.append(k)
        warm = (result.u_star, result.duals)
        g_row = np.full(len(labels), np.nan)
        for lbl, val in zip(ev.labels, ev.values):
            g_row[labels.index(lbl)] = val

        rows_t.append(k * scenario.dt)
        rows_x.append(state.positions.copy())
        rows_u.append(u.copy())
        rows_lam.append(ws.eigenvalues.copy())
        rows_g.append(g_row)
        rows_p.append(task.priority)
        rows_iters.append(result.iters)
        rows_kkt.append(result.kkt_residual)
        rows_slack.append(strict_feasibility_probe(ws, scenario.barrier, task))

        state = step(state, u, scenario.dt)
        u_prev = u
        mission = advance_mission(state, mission, base_task)
    else:
        reason = "all_reached" if mission.done else "max_steps"

    count = len(rows_t)
    return TrajectoryLog(
        t=np.array(rows_t),
        x=np.array(rows_x).reshape(count, state.size),
        u=np.array(rows_u).reshape(count, state.size),
        eigenvalues=np.array(rows_lam).reshape(count, n),
        g=np.array(rows_g).reshape(count, len(labels)),
        g_labels=labels,
        priority=np.array(rows_p, dtype=int),
        iters=np.array(rows_iters, dtype=int),
        kkt=np.array(rows_kkt),
        slack=np.array(rows_slack),
        reason=reason,
        flagged=flagged,
    )


def csv_header(log: TrajectoryLog) -> list[str]:
    n_inputs = log.x.shape[1]
    n = log.eigenvalues.shape[1]
    cols = ["t"]
    cols += [f"x_{i}" for i in range(n_inputs)]
    cols += [f"u_{i}" for i in range(n_inputs)]
    cols += [f"lambda_{m}" for m in range(1, n + 1)]
    cols += [f"g_{lbl}" for lbl in log.g_labels]
    cols += ["P", "iters", "kkt", "slack"]
    return cols


def _format(value: float) -> str:
    return f"{value:.9g}"


def export_csv(log: TrajectoryLog, path) -> None:
    """Write the log as comma-separated text, one newline-terminated row per
    step, values with 9 significant digits. Identical logs produce
    byte-identical files."""
    buf = io.StringIO()
    buf.write(",".join(csv_header(log)) + "\n")
    for k in range(len(log)):
        fields = [_format(log.t[k])]
        fields += [_format(v) for v in log.x[k]]
        fields += [_format(v) for v in log.u[k]]
        fields += [_format(v) for v in log.eigenvalues[k]]
        fields += [_format(v) for v in log.g[k]]
        fields += [str(int(log.priority[k])), str(int(log.iters[k]))]
        fields += [_format(log.kkt[k]), _format(log.slack[k])]
        buf.write(",".join(fields) + "\n")
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write log to {path}: {exc}") from exc


_SCALAR_KEYS = {
    "range": float,
    "sigma": float,
    "taper": float,
    "epsilon": float,
    "alpha_slope": float,
    "v_nom": float,
    "k_frac": float,
    "target_radius": float,
    "dt": float,
    "max_steps": int,
    "solver_step": float,
    "solver_iters": int,
    "kkt_tol": float,
}
_VECTOR_KEYS = {"dims", "positions", "targets", "priority"}


def load_scenario(path) -> Scenario:
    """Parse a scenario from the flat key/value text format.

    Each non-comment line is ``key value [value ...]`` with whitespace
    separation; '#' starts a comment. Required keys: dims, positions,
    targets, priority, range, sigma, taper, epsilon, v_nom, k_frac,
    target_radius, dt, max_steps. Optional: alpha_slope (default 1),
    solver_step, solver_iters, kkt_tol (solver defaults otherwise).
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc

    entries: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *values = line.split()
        if key in entries:
            raise ScenarioError(f"{path}:{lineno}: duplicate key '{key}'")
        if not values:
            raise ScenarioError(f"{path}:{lineno}: key '{key}' has no value")
        entries[key] = values

    def take_scalar(key: str, default=None):
        if key not in entries:
            if default is not None:
                return default
            raise ScenarioError(f"{path}: missing required key '{key}'")
        values = entries.pop(key)
        if len(values) != 1:
            raise ScenarioError(f"{path}: key '{key}' expects a single value")
        try:
            return _SCALAR_KEYS[key](float(values[0]))
        except ValueError as exc:
            raise ScenarioError(f"{path}: bad value for '{key}': {values[0]}") from exc

    def take_vector(key: str, kind=float) -> list:
        if key not in entries:
            raise ScenarioError(f"{path}: missing required key '{key}'")
        try:
            return [kind(float(v)) for v in entries.pop(key)]
        except ValueError as exc:
            raise ScenarioError(f"{path}: bad values for '{key}'") from exc

    dims = take_vector("dims", int)
    positions = take_vector("positions")
    targets = take_vector("targets")
    priority = take_vector("priority", int)

    try:
        state = NetworkState(np.array(positions), tuple(dims))
        proximity = ProximityConfig(
            cutoff=take_scalar("range"),
            sigma=take_scalar("sigma"),
            taper=take_scalar("taper"),
        )
        barrier = BarrierParams(
            epsilon=take_scalar("epsilon"),
            alpha_slope=take_scalar("alpha_slope", 1.0),
        )
        solver = SaddleParams(
            step=take_scalar("solver_step", SaddleParams.step),
            max_iters=take_scalar("solver_iters", SaddleParams.max_iters),
            kkt_tol=take_scalar("kkt_tol", SaddleParams.kkt_tol),
        )
        scenario = Scenario(
            initial_state=state,
            targets=np.array(targets),
            priority_order=tuple(priority),
            proximity=proximity,
            barrier=barrier,
            v_nom=take_scalar("v_nom"),
            k_frac=take_scalar("k_frac"),
            target_radius=take_scalar("target_radius"),
            dt=take_scalar("dt"),
            max_steps=take_scalar("max_steps"),
            solver=solver,
        )
    except (GraphError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{path}: {exc}") from exc

    if entries:
        raise ScenarioError(f"{path}: unknown keys {sorted(entries)}")
    return scenario
