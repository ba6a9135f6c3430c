"""Randomized invariant and oracle measurements.

Shared by the ``check`` CLI subcommand and the acceptance test suite: each
routine returns measured quantities (worst violations, gaps, errors) and the
callers compare them against their tolerances.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .constraints import BarrierParams, ConstraintEval
from .graph import NetworkState, ProximityConfig, evaluate_graph
from .sim import Scenario, TrajectoryLog, load_scenario
from .solver import SaddleParams, saddle_solve
from .spectrum import (
    SpectralWorkspace,
    oracle_convex_hull_min,
    spectral_decompose,
)

DEFAULT_CFG = ProximityConfig(cutoff=2.0, sigma=2.0, taper=0.5)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def bundled_scenario(name: str) -> Scenario:
    """Load a scenario shipped with the package (e.g. 'gather4.scn')."""
    path = resources.files("connmaint") / "scenarios" / name
    return load_scenario(str(path))


def random_connected_state(
    rng: np.random.Generator,
    n: int,
    cfg: ProximityConfig = DEFAULT_CFG,
    dim: int = 2,
    min_connectivity: float = 0.05,
) -> NetworkState:
    """Sample robot positions until the proximity graph is clearly connected."""
    spread = 0.75 * cfg.cutoff
    while True:
        pts = rng.uniform(-spread, spread, size=(n, dim))
        state = NetworkState.from_rows(pts)
        graph = evaluate_graph(state, cfg)
        if spectral_decompose(graph.laplacian).eigenvalues[1] >= min_connectivity:
            return state


def random_unit_input(rng: np.random.Generator, size: int) -> np.ndarray:
    u = rng.standard_normal(size)
    return u / np.linalg.norm(u)


# ---------------------------------------------------------------------------
# spectral layer


def spectral_batch(count: int = 200, seed: int = 0, cfg: ProximityConfig = DEFAULT_CFG):
    """Worst lambda_1, Laplacian row sum, and reconstruction error over random
    connected configurations."""
    rng = np.random.default_rng(seed)
    worst_l1 = 0.0
    worst_rowsum = 0.0
    worst_recon = 0.0
    start = time.perf_counter()
    for _ in range(count):
        n = int(rng.integers(3, 9))
        state = random_connected_state(rng, n, cfg)
        graph = evaluate_graph(state, cfg)
        spec = spectral_decompose(graph.laplacian)
        worst_l1 = max(worst_l1, abs(float(spec.eigenvalues[0])))
        worst_rowsum = max(
            worst_rowsum, float(np.max(np.abs(graph.laplacian @ np.ones(n))))
        )
        recon = spec.eigenvectors @ np.diag(spec.eigenvalues) @ spec.eigenvectors.T
        worst_recon = max(worst_recon, float(np.linalg.norm(recon - graph.laplacian)))
    elapsed = time.perf_counter() - start
    return {
        "max_lambda1": worst_l1,
        "max_rowsum": worst_rowsum,
        "max_reconstruction": worst_recon,
        "elapsed": elapsed,
    }


def oracle_gaps(
    cases: int = 100,
    samples: int = 10**5,
    seed: int = 1,
    cfg: ProximityConfig = DEFAULT_CFG,
):
    """Sampled-hull oracle versus the reduced eigenvalue route.

    Returns the worst undershoot of the oracle's running minimum below mu
    (should be ~0: sampling can only overshoot) and the worst final gap.
    """
    rng = np.random.default_rng(seed)
    worst_under = 0.0
    worst_gap = 0.0
    for _ in range(cases):
        n = int(rng.integers(3, 6))
        state = random_connected_state(rng, n, cfg)
        u = random_unit_input(rng, state.size)
        m = int(rng.integers(2, n + 1))
        ws = SpectralWorkspace(state, cfg)
        mu = ws.merged_bound(u, m).mu
        running = oracle_convex_hull_min(
            state, u, m, samples, cfg, rng=rng, running=True
        )
        worst_under = max(worst_under, float(mu - running.min()))
        worst_gap = max(worst_gap, float(running[-1] - mu))
    return {"max_undershoot": worst_under, "max_gap": worst_gap}


def concavity_violation(
    trials: int = 1000, seed: int = 2, cfg: ProximityConfig = DEFAULT_CFG
) -> float:
    """Worst violation of concavity of mu in the input over random triples."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(trials):
        n = int(rng.integers(3, 7))
        state = random_connected_state(rng, n, cfg)
        ws = SpectralWorkspace(state, cfg)
        u1 = rng.standard_normal(state.size)
        u2 = rng.standard_normal(state.size)
        gamma = float(rng.uniform())
        mix = gamma * u1 + (1.0 - gamma) * u2
        for m in range(2, n + 1):
            lhs = ws.merged_bound(mix, m).mu
            rhs = gamma * ws.merged_bound(u1, m).mu + (1.0 - gamma) * ws.merged_bound(u2, m).mu
            worst = max(worst, rhs - lhs)
    return float(worst)


def homogeneity_nesting(
    draws: int = 500, seed: int = 3, cfg: ProximityConfig = DEFAULT_CFG
):
    """Worst relative homogeneity error and worst nesting violation."""
    rng = np.random.default_rng(seed)
    worst_hom = 0.0
    worst_nest = -np.inf
    for _ in range(draws):
        n = int(rng.integers(3, 7))
        state = random_connected_state(rng, n, cfg)
        ws = SpectralWorkspace(state, cfg)
        u = rng.standard_normal(state.size)
        c = float(rng.uniform(0.0, 10.0))
        m = int(rng.integers(2, n + 1))
        mu = ws.merged_bound(u, m).mu
        mu_scaled = ws.merged_bound(c * u, m).mu
        worst_hom = max(
            worst_hom, abs(mu_scaled - c * mu) / max(abs(c * mu), 1e-12)
        )
        mus = [ws.merged_bound(u, mm).mu for mm in range(2, n + 1)]
        for a in range(len(mus) - 1):
            worst_nest = max(worst_nest, mus[a + 1] - mus[a])
    return {"max_homogeneity_rel": worst_hom, "max_nesting": float(worst_nest)}


def gradient_fidelity(
    points: int = 200,
    seed: int = 4,
    cfg: ProximityConfig = DEFAULT_CFG,
    fd_step: float = 1e-6,
    gap_floor: float = 1e-6,
):
    """Worst mismatch between the analytic input gradient of mu and central
    finite differences, at points where the reduced minimum eigenvalue is
    simple (gap above gap_floor).

    Relative error uses max(|analytic|_inf, |fd|_inf, 1e-4) as denominator so
    finite-difference noise near zero gradients cannot dominate.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < points:
        n = int(rng.integers(3, 7))
        state = random_connected_state(rng, n, cfg)
        ws = SpectralWorkspace(state, cfg)
        u = rng.standard_normal(state.size)
        m = int(rng.integers(2, n + 1))
        bound = ws.merged_bound(u, m)
        if bound.z.shape[0] > 1:
            zvals = np.linalg.eigvalsh(bound.z)
            if zvals[1] - zvals[0] <= gap_floor:
                continue
        fd = np.empty(state.size)
        for i in range(state.size):
            up = u.copy(); up[i] += fd_step
            dn = u.copy(); dn[i] -= fd_step
            fd[i] = (ws.merged_bound(up, m).mu - ws.merged_bound(dn, m).mu) / (2 * fd_step)
        scale = max(float(np.max(np.abs(bound.grad_u))), float(np.max(np.abs(fd))), 1e-4)
        worst = max(worst, float(np.max(np.abs(fd - bound.grad_u))) / scale)
        done += 1
    return worst


# ---------------------------------------------------------------------------
# solver layer


def toy_program_errors(params: SaddleParams = SaddleParams()):
    """Solve min ||u||^2 s.t. 1 - u_1 <= 0 (optimum e_1, dual 2)."""

    def cost(u):
        return float(u @ u), 2.0 * u

    def constraint(u):
        grad = np.zeros((1, u.size))
        grad[0, 0] = -1.0
        return ConstraintEval(
            values=np.array([1.0 - u[0]]), grad_u=grad, labels=("toy",)
        )

    res = saddle_solve(cost, [constraint], 3, params)
    target = np.array([1.0, 0.0, 0.0])
    return {
        "kkt": res.kkt_residual,
        "u_err": float(np.max(np.abs(res.u_star - target))),
        "dual_err": abs(float(res.duals[0]) - 2.0),
        "converged": res.converged,
    }


def active_set_qp(a: np.ndarray, B: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Brute-force minimizer of ||u - a||^2 s.t. B u + c <= 0.

    Enumerates candidate active sets, solves each equality-constrained KKT
    system in closed form, and keeps the feasible candidate with nonnegative
    multipliers. Independent of the saddle-point iteration; used as a test
    oracle only.
    """
    k = B.shape[0]
    best_val, best_u = np.inf, None
    for mask in range(2**k):
        active = [j for j in range(k) if (mask >> j) & 1]
        if len(active) > a.size:
            continue
        if active:
            Ba, ca = B[active], c[active]
            gram = Ba @ Ba.T / 2.0
            try:
                lam = np.linalg.solve(gram, Ba @ a + ca)
            except np.linalg.LinAlgError:
                continue
            if lam.min() < -1e-9:
                continue
            u = a - Ba.T @ lam / 2.0
        else:
            u = a.copy()
        if np.any(B @ u + c > 1e-9):
            continue
        val = float((u - a) @ (u - a))
        if val < best_val:
            best_val, best_u = val, u
    if best_u is None:
        raise RuntimeError("active-set enumeration found no feasible candidate")
    return best_u


def random_program(rng: np.random.Generator):
    """Feasible random QP: quadratic deviation cost, <= 4 affine constraints."""
    size = int(rng.integers(2, 9))
    k = int(rng.integers(1, 5))
    B = rng.standard_normal((k, size))
    B /= np.linalg.norm(B, axis=1, keepdims=True)
    interior = 0.5 * rng.standard_normal(size)
    slack = rng.uniform(0.1, 1.0, size=k)
    c = -B @ interior - slack
    a = interior + rng.standard_normal(size)
    return a, B, c


def solver_program_errors(count: int = 50, seed: int = 5, params: SaddleParams = SaddleParams()):
    """Worst deviation of the saddle solver from the active-set oracle."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    nonconverged = 0
    for _ in range(count):
        a, B, c = random_program(rng)

        def cost(u, a=a):
            r = u - a
            return float(r @ r), 2.0 * r

        def constraint(u, B=B, c=c):
            return ConstraintEval(
                values=B @ u + c,
                grad_u=B.copy(),
                labels=tuple(f"c{j}" for j in range(B.shape[0])),
            )

        res = saddle_solve(cost, [constraint], a.size, params)
        if not res.converged:
            nonconverged += 1
        expected = active_set_qp(a, B, c)
        worst = max(worst, float(np.max(np.abs(res.u_star - expected))))
    return {"max_deviation": worst, "nonconverged": nonconverged}


# ---------------------------------------------------------------------------
# trajectory certificates


def min_connectivity(log: TrajectoryLog) -> float:
    return float(log.eigenvalues[:, 1].min()) if len(log) else np.inf


def rate_consistency_violation(log: TrajectoryLog, bp: BarrierParams, dt: float) -> float:
    """Worst violation of the per-eigenvalue decrease bound along a log.

    Checks (lambda_m(k+1) - lambda_m(k)) / dt >= -alpha(lambda_m(k) - eps)
    - tol with tol = 1e-2 (1 + |u_k|) absorbing discretization error.
    """
    if len(log) < 2:
        return 0.0
    lam = log.eigenvalues[:, 1:]
    rates = np.diff(lam, axis=0) / dt
    margins = np.array([[bp.alpha(v - bp.epsilon) for v in row] for row in lam[:-1]])
    tol = 1e-2 * (1.0 + np.linalg.norm(log.u[:-1], axis=1))
    violation = (-margins - tol[:, None]) - rates
    return float(np.max(violation))


def input_jumps(log: TrajectoryLog) -> np.ndarray:
    """Norm of consecutive input differences, skipping priority switches.

    Priority handovers change the constraint set discontinuously by design,
    so jumps across them say nothing about controller continuity.
    """
    if len(log) < 2:
        return np.zeros(0)
    jumps = np.linalg.norm(np.diff(log.u, axis=0), axis=1)
    same_priority = np.diff(log.priority) == 0
    return jumps[same_priority]


def input_jump_metric(log: TrajectoryLog) -> float:
    jumps = input_jumps(log)
    return float(jumps.max()) if jumps.size else 0.0


def smooth_rate_estimate(log: TrajectoryLog, dt: float, gap_threshold: float = 0.05) -> float:
    """Largest input rate |du|/dt over steps away from eigenvalue merges.

    A step is smooth when every adjacent nonzero-eigenvalue gap exceeds the
    threshold at both endpoints. Returns the max rate over smooth steps; a
    caller multiplies by a safety factor to form the continuity bound.
    """
    jumps = input_jumps(log)
    if not jumps.size:
        return 0.0
    gaps = np.diff(log.eigenvalues[:, 1:], axis=1)
    clear = gaps.min(axis=1) > gap_threshold if gaps.size else np.ones(len(log), bool)
    same_priority = np.diff(log.priority) == 0
    smooth = (clear[:-1] & clear[1:])[same_priority]
    if not smooth.any():
        return 0.0
    return float(jumps[smooth].max() / dt)


# ---------------------------------------------------------------------------
# aggregation for the CLI


def run_all(full: bool = False, seed: int = 0) -> list[CheckResult]:
    results: list[CheckResult] = []

    batch = spectral_batch(200, seed=seed)
    results.append(
        CheckResult(
            "spectral correctness",
            batch["max_lambda1"] < 1e-9
            and batch["max_rowsum"] < 1e-12
            and batch["max_reconstruction"] < 1e-8,
            f"lambda1 {batch['max_lambda1']:.2e}, rowsum {batch['max_rowsum']:.2e}, "
            f"recon {batch['max_reconstruction']:.2e} in {batch['elapsed']:.2f}s",
        )
    )

    gaps = oracle_gaps(cases=25, samples=20000, seed=seed + 1)
    results.append(
        CheckResult(
            "sampled-hull oracle bound",
            gaps["max_undershoot"] < 1e-9 and gaps["max_gap"] < 5e-3,
            f"undershoot {gaps['max_undershoot']:.2e}, gap {gaps['max_gap']:.2e}",
        )
    )

    conc = concavity_violation(trials=400, seed=seed + 2)
    results.append(
        CheckResult("concavity in the input", conc < 1e-9, f"violation {conc:.2e}")
    )

    hom = homogeneity_nesting(draws=300, seed=seed + 3)
    results.append(
        CheckResult(
            "homogeneity and nesting",
            hom["max_homogeneity_rel"] < 1e-9 and hom["max_nesting"] < 1e-10,
            f"homogeneity {hom['max_homogeneity_rel']:.2e}, "
            f"nesting {hom['max_nesting']:.2e}",
        )
    )

    grad = gradient_fidelity(points=200, seed=seed + 4)
    results.append(
        CheckResult("gradient fidelity", grad < 1e-4, f"relative error {grad:.2e}")
    )

    toy = toy_program_errors()
    results.append(
        CheckResult(
            "solver toy program",
            toy["converged"] and toy["kkt"] < 1e-5 and toy["u_err"] < 1e-4
            and toy["dual_err"] < 1e-4,
            f"kkt {toy['kkt']:.2e}, u err {toy['u_err']:.2e}, dual err {toy['dual_err']:.2e}",
        )
    )

    prog = solver_program_errors(count=50, seed=seed + 5)
    results.append(
        CheckResult(
            "solver vs active-set oracle",
            prog["max_deviation"] < 1e-3 and prog["nonconverged"] == 0,
            f"max deviation {prog['max_deviation']:.2e}, "
            f"nonconverged {prog['nonconverged']}",
        )
    )

    if full:
        results.extend(_simulation_checks())
    return results


def _simulation_checks() -> list[CheckResult]:
    from .controllers import ControllerKind
    from .sim import export_csv, run
    import io
    import tempfile
    from pathlib import Path

    results: list[CheckResult] = []
    scenario = bundled_scenario("gather4.scn")
    logs = {}
    for kind in (ControllerKind.STRICT, ControllerKind.AGGREGATE):
        logs[kind] = run(scenario, kind)
        min_l2 = min_connectivity(logs[kind])
        ok = (
            logs[kind].reason == "all_reached"
            and min_l2 >= scenario.barrier.epsilon - 1e-3
        )
        results.append(
            CheckResult(
                f"connectivity maintained ({kind.value})",
                ok,
                f"{len(logs[kind])} steps, {logs[kind].reason}, min lambda_2 {min_l2:.4f}",
            )
        )
    agg_steps = len(logs[ControllerKind.AGGREGATE])
    str_steps = len(logs[ControllerKind.STRICT])
    results.append(
        CheckResult(
            "aggregate completes no later than strict",
            agg_steps <= str_steps,
            f"agg {agg_steps} vs str {str_steps} steps",
        )
    )
    worst_slack = min(float(logs[k].slack.min()) for k in logs)
    results.append(
        CheckResult(
            "strict feasibility along runs", worst_slack > 0.0, f"min slack {worst_slack:.4g}"
        )
    )

    merge = bundled_scenario("merge3.scn")
    log_dis = run(merge, ControllerKind.DISCONTINUOUS)
    log_agg = run(merge, ControllerKind.AGGREGATE)
    chi_dis = input_jump_metric(log_dis)
    chi_agg = input_jump_metric(log_agg)
    rate = smooth_rate_estimate(log_agg, merge.dt)
    results.append(
        CheckResult(
            "baseline chattering dominates aggregate",
            chi_dis >= 10.0 * chi_agg and chi_agg <= 1.5 * rate * merge.dt,
            f"chi_dis {chi_dis:.4g}, chi_agg {chi_agg:.4g}, smooth rate {rate:.4g}",
        )
    )

    with tempfile.TemporaryDirectory() as tmp:
        p1, p2 = Path(tmp) / "a.csv", Path(tmp) / "b.csv"
        export_csv(run(merge, ControllerKind.AGGREGATE), p1)
        export_csv(run(merge, ControllerKind.AGGREGATE), p2)
        identical = p1.read_bytes() == p2.read_bytes()
    results.append(
        CheckResult("deterministic replay", identical, "byte-identical CSV logs")
    )
    return results
