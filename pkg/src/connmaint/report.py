"""Render trajectory logs as figures: eigenvalue evolution, control inputs,
and constraint values over time."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import TrajectoryLog


def plot_eigenvalues(log: TrajectoryLog, epsilon: float | None = None, ax=None):
    if ax is None:
        _, ax = plt.subplots()
    n = log.eigenvalues.shape[1]
    for m in range(n):
        ax.plot(log.t, log.eigenvalues[:, m], label=rf"$\lambda_{{{m + 1}}}$")
    if epsilon is not None:
        ax.axhline(epsilon, color="k", linestyle="--", linewidth=1, label=r"$\varepsilon$")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("Laplacian eigenvalues")
    ax.legend(ncol=2, fontsize="small")
    ax.grid(alpha=0.3)
    return ax


def plot_inputs(log: TrajectoryLog, ax=None):
    if ax is None:
        _, ax = plt.subplots()
    for i in range(log.u.shape[1]):
        ax.plot(log.t, log.u[:, i], linewidth=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("control input components")
    ax.grid(alpha=0.3)
    return ax


def plot_constraints(log: TrajectoryLog, ax=None):
    if ax is None:
        _, ax = plt.subplots()
    for j, lbl in enumerate(log.g_labels):
        ax.plot(log.t, log.g[:, j], label=f"g_{lbl}", linewidth=0.9)
    ax.axhline(0.0, color="k", linewidth=1)
    # shade priority changes
    switches = np.flatnonzero(np.diff(log.priority)) if len(log) > 1 else []
    for k in switches:
        ax.axvline(log.t[k + 1], color="r", linestyle="--", linewidth=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("constraint residuals (feasible below 0)")
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    return ax


def render_report(
    log: TrajectoryLog, out_dir, stem: str, epsilon: float | None = None
) -> list[Path]:
    """Write the three standard figures as PNG files; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, draw in (
        ("eigenvalues", lambda ax: plot_eigenvalues(log, epsilon=epsilon, ax=ax)),
        ("inputs", lambda ax: plot_inputs(log, ax=ax)),
        ("constraints", lambda ax: plot_constraints(log, ax=ax)),
    ):
        fig, ax = plt.subplots(figsize=(7, 3.6))
        draw(ax)
        fig.tight_layout()
        path = out / f"{stem}_{name}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def log_from_csv(path) -> TrajectoryLog:
    """Rebuild a TrajectoryLog from a file produced by ``export_csv``."""
    data = np.genfromtxt(path, delimiter=",", names=True, deletechars="")
    names = list(data.dtype.names or [])
    if not names:
        raise ValueError(f"{path}: not a trajectory log")
    data = np.atleast_1d(data)

    def cols(prefix: str) -> list[str]:
        return [c for c in names if c.startswith(prefix)]

    def stack(keys: list[str]) -> np.ndarray:
        return np.column_stack([data[k] for k in keys]) if keys else np.zeros((len(data), 0))

    g_cols = cols("g_")
    return TrajectoryLog(
        t=np.asarray(data["t"], dtype=float),
        x=stack(cols("x_")),
        u=stack(cols("u_")),
        eigenvalues=stack(cols("lambda_")),
        g=stack(g_cols),
        g_labels=tuple(c[len("g_"):] for c in g_cols),
        priority=np.asarray(data["P"], dtype=int),
        iters=np.asarray(data["iters"], dtype=int),
        kkt=np.asarray(data["kkt"], dtype=float),
        slack=np.asarray(data["slack"], dtype=float),
        reason="imported",
    )
