"""Proximity graphs: smooth distance-based edge weights, the Laplacian, and
its partial derivatives with respect to every scalar state component."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GraphError(ValueError):
    """Raised for states or configurations the graph layer cannot evaluate."""


@dataclass(frozen=True)
class ProximityConfig:
    """Parameters of the distance-based edge weight law.

    cutoff: communication range; edges vanish at and beyond this distance.
    sigma: Gaussian decay scale of the weight.
    taper: width of the smooth fade-out band just inside the cutoff
        (must satisfy 0 < taper < cutoff so the weight stays C1).
    """

    cutoff: float
    sigma: float
    taper: float

    def __post_init__(self) -> None:
        if not (self.cutoff > 0.0 and self.sigma > 0.0):
            raise GraphError(
                f"cutoff and sigma must be positive, got {self.cutoff}, {self.sigma}"
            )
        if not (0.0 < self.taper < self.cutoff):
            raise GraphError(
                f"taper must lie in (0, cutoff), got {self.taper} with cutoff {self.cutoff}"
            )


@dataclass(frozen=True)
class NetworkState:
    """Stacked robot positions with per-robot dimensions.

    positions: flat vector of length N = sum(dims), robot r occupying the
        contiguous block given by ``block(r)``.
    """

    positions: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float).ravel()
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) < 2:
            raise GraphError("need at least two robots")
        if any(d < 1 for d in self.dims):
            raise GraphError(f"robot dimensions must be >= 1, got {self.dims}")
        if pos.size != sum(self.dims):
            raise GraphError(
                f"positions has {pos.size} entries, dims require {sum(self.dims)}"
            )
        if not np.all(np.isfinite(pos)):
            raise GraphError("positions must be finite")

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "NetworkState":
        """Build a state from an (n, d) array of robot positions."""
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2:
            raise GraphError(f"expected an (n, d) array, got shape {rows.shape}")
        return cls(rows.ravel(), (rows.shape[1],) * rows.shape[0])

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return self.positions.size

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    def block(self, r: int) -> slice:
        off = self.offsets()
        return slice(int(off[r]), int(off[r + 1]))

    def robot(self, r: int) -> np.ndarray:
        return self.positions[self.block(r)]

    def with_positions(self, positions: np.ndarray) -> "NetworkState":
        return NetworkState(positions, self.dims)


@dataclass(frozen=True)
class GraphEval:
    """Adjacency, Laplacian, and the N matrices dL/dx_i at one state.

    jacobians is stacked as an (N, n, n) array; entry i is nonzero only in
    the row/column of the robot owning state component i (plus the diagonal
    compensation that keeps row sums at zero).
    """

    adjacency: np.ndarray
    laplacian: np.ndarray
    jacobians: np.ndarray


def edge_weight(d, cfg: ProximityConfig):
    """Weight of an edge at inter-robot distance d.

    Gaussian decay exp(-d^2 / (2 sigma^2)) multiplied by a cubic smoothstep
    that fades from 1 to 0 over the band [cutoff - taper, cutoff], making the
    weight C1 with compact support. Accepts scalars or arrays.
    """
    d = np.asarray(d, dtype=float)
    t = np.clip((d - (cfg.cutoff - cfg.taper)) / cfg.taper, 0.0, 1.0)
    fade = 1.0 - t * t * (3.0 - 2.0 * t)
    w = np.exp(-d * d / (2.0 * cfg.sigma**2)) * fade
    return float(w) if w.ndim == 0 else w


def edge_weight_derivative(d, cfg: ProximityConfig):
    """Derivative of ``edge_weight`` with respect to distance.

    Product rule on the Gaussian and the fade factor; identically zero at and
    beyond the cutoff. Accepts scalars or arrays.
    """
    d = np.asarray(d, dtype=float)
    gauss = np.exp(-d * d / (2.0 * cfg.sigma**2))
    t = np.clip((d - (cfg.cutoff - cfg.taper)) / cfg.taper, 0.0, 1.0)
    fade = 1.0 - t * t * (3.0 - 2.0 * t)
    # 6t(1-t) vanishes at both clamp ends, so no masking is needed
    dfade = -6.0 * t * (1.0 - t) / cfg.taper
    w = gauss * (-d / cfg.sigma**2) * fade + gauss * dfade
    return float(w) if w.ndim == 0 else w


def evaluate_graph(state: NetworkState, cfg: ProximityConfig) -> GraphEval:
    """Evaluate adjacency, Laplacian, and all Laplacian partials at a state.

    Requires a uniform robot dimension (inter-robot distances are otherwise
    undefined). Coincident robots get weight 1 and a zero derivative.
    """
    dims = set(state.dims)
    if len(dims) != 1:
        raise GraphError(
            f"distance-based weights need a uniform robot dimension, got {state.dims}"
        )
    d = dims.pop()
    n = state.n
    pts = state.positions.reshape(n, d)

    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))

    adjacency = edge_weight(dist, cfg)
    np.fill_diagonal(adjacency, 0.0)
    laplacian = np.diag(adjacency.sum(axis=1)) - adjacency

    wprime = edge_weight_derivative(dist, cfg)
    np.fill_diagonal(wprime, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(dist[:, :, None] > 0.0, diff / dist[:, :, None], 0.0)

    jacobians = np.zeros((state.size, n, n))
    for p in range(n):
        for axis in range(d):
            i = p * d + axis
            # dA_pq/dx_i for all q; only the owner row/column changes
            row = wprime[p] * unit[p, :, axis]
            dA = np.zeros((n, n))
            dA[p, :] = row
            dA[:, p] += row
            jacobians[i] = np.diag(dA.sum(axis=1)) - dA
    return GraphEval(adjacency=adjacency, laplacian=laplacian, jacobians=jacobians)


def directional_laplacian_derivative(graph: GraphEval, u: np.ndarray) -> np.ndarray:
    """Input-weighted Laplacian derivative sum_i u_i dL/dx_i."""
    u = np.asarray(u, dtype=float).ravel()
    if u.size != graph.jacobians.shape[0]:
        raise GraphError(
            f"input has {u.size} entries, state has {graph.jacobians.shape[0]}"
        )
    return np.tensordot(u, graph.jacobians, axes=(0, 0))
