"""Command-line interface: simulate, check, probe, and report."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import checks
from .constraints import feasibility_breakdown, strict_feasibility_probe
from .controllers import ControllerKind, MissionState, advance_mission
from .graph import GraphError
from .sim import ScenarioError, Scenario, export_csv, load_scenario, run
from .solver import SaddleParams
from .spectrum import SpectralWorkspace, SpectrumError

CONNECTIVITY_SLACK = 1e-3  # discretization allowance on the lambda_2 >= epsilon certificate


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    updates = {}
    if args.dt is not None:
        updates["dt"] = args.dt
    if args.max_steps is not None:
        updates["max_steps"] = args.max_steps
    solver_updates = {}
    if args.solver_step is not None:
        solver_updates["step"] = args.solver_step
    if args.solver_iters is not None:
        solver_updates["max_iters"] = args.solver_iters
    if args.kkt_tol is not None:
        solver_updates["kkt_tol"] = args.kkt_tol
    if solver_updates:
        updates["solver"] = dataclasses.replace(scenario.solver, **solver_updates)
    return dataclasses.replace(scenario, **updates) if updates else scenario


def _add_run_options(p: argparse.ArgumentParser, require_controller: bool = True):
    p.add_argument("--scenario", required=True, help="scenario file path")
    p.add_argument(
        "--controller",
        required=require_controller,
        choices=[k.value for k in ControllerKind],
        help="dis (baseline), str (strict), agg (aggregate)",
    )
    p.add_argument("--dt", type=float, help="integration step override [s]")
    p.add_argument("--max-steps", type=int, help="step budget override")
    p.add_argument("--solver-step", type=float, help="saddle-point step size override")
    p.add_argument("--solver-iters", type=int, help="saddle-point iteration budget override")
    p.add_argument("--kkt-tol", type=float, help="KKT stopping tolerance override")


def _summarize(log, scenario: Scenario) -> bool:
    print(f"steps: {len(log)}  termination: {log.reason}")
    if len(log):
        min_l2 = float(log.eigenvalues[:, 1].min())
        print(f"min lambda_2: {min_l2:.6g}  (threshold {scenario.barrier.epsilon:.6g})")
        print(f"min probe slack: {float(log.slack.min()):.6g}")
        if log.flagged:
            print(f"solver non-convergence at {len(log.flagged)} steps")
        connected = min_l2 >= scenario.barrier.epsilon - CONNECTIVITY_SLACK
    else:
        connected = True
    return log.reason == "all_reached" and connected


def _cmd_simulate(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    log = run(scenario, ControllerKind(args.controller))
    export_csv(log, args.out)
    print(f"wrote {len(log)} rows to {args.out}")
    return 0 if _summarize(log, scenario) else 1


def _cmd_probe(args) -> int:
    scenario = load_scenario(args.scenario)
    state = scenario.initial_state
    mission = advance_mission(
        state, MissionState.fresh(scenario.priority_order), scenario.task(None)
    )
    task = scenario.task(mission.current_priority)
    ws = SpectralWorkspace(state, scenario.proximity)
    breakdown = feasibility_breakdown(ws, scenario.barrier, task)
    print(f"lambda_2: {float(ws.eigenvalues[1]):.6g}")
    for lbl, val in zip(breakdown.labels, breakdown.values):
        print(f"  {lbl:>6}: g = {val: .6g}  slack = {-val: .6g}")
    slack = strict_feasibility_probe(ws, scenario.barrier, task)
    print(f"slack: {slack:.6g}")
    return 0 if slack > 0.0 else 1


def _cmd_check(args) -> int:
    results = checks.run_all(full=args.full, seed=args.seed)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status}  {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_report(args) -> int:
    from . import report  # deferred: pulls in matplotlib

    out_dir = Path(args.out_dir)
    if args.log is not None:
        log = report.log_from_csv(args.log)
        stem = Path(args.log).stem
        epsilon = args.epsilon
    else:
        if args.scenario is None or args.controller is None:
            print("report needs either --log or both --scenario and --controller",
                  file=sys.stderr)
            return 2
        scenario = _apply_overrides(load_scenario(args.scenario), args)
        log = run(scenario, ControllerKind(args.controller))
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = args.controller
        export_csv(log, out_dir / f"{stem}.csv")
        epsilon = scenario.barrier.epsilon
    paths = report.render_report(log, out_dir, stem, epsilon=epsilon)
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="connmaint",
        description="Connectivity-maintaining multi-robot control simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim_p = sub.add_parser("simulate", help="run a scenario and export the log")
    _add_run_options(sim_p)
    sim_p.add_argument("--out", required=True, help="output CSV path")
    sim_p.set_defaults(func=_cmd_simulate)

    probe_p = sub.add_parser("probe", help="print feasibility slack at the initial state")
    probe_p.add_argument("--scenario", required=True, help="scenario file path")
    probe_p.set_defaults(func=_cmd_probe)

    check_p = sub.add_parser("check", help="run the invariant and oracle suite")
    check_p.add_argument("--full", action="store_true",
                         help="include the simulation-based certificates (slow)")
    check_p.add_argument("--seed", type=int, default=0, help="random seed")
    check_p.set_defaults(func=_cmd_check)

    report_p = sub.add_parser("report", help="render figures (and CSV) for a run")
    report_p.add_argument("--scenario", help="scenario file path")
    report_p.add_argument(
        "--controller", choices=[k.value for k in ControllerKind], help="controller kind"
    )
    report_p.add_argument("--log", help="render from an existing CSV instead of running")
    report_p.add_argument("--epsilon", type=float,
                          help="threshold line for --log mode figures")
    report_p.add_argument("--out-dir", required=True, help="output directory")
    report_p.add_argument("--dt", type=float, help="integration step override [s]")
    report_p.add_argument("--max-steps", type=int, help="step budget override")
    report_p.add_argument("--solver-step", type=float)
    report_p.add_argument("--solver-iters", type=int)
    report_p.add_argument("--kkt-tol", type=float)
    report_p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, GraphError, SpectrumError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
