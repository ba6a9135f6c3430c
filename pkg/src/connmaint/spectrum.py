"""Laplacian spectra, merged eigenspace bases, and the merged lower bounds
on eigenvalue rates of change, computed as reduced minimum-eigenvalue
problems together with one generalized-gradient element."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import (
    GraphEval,
    NetworkState,
    ProximityConfig,
    directional_laplacian_derivative,
    evaluate_graph,
)


class SpectrumError(ValueError):
    """Raised for inputs the spectral layer cannot decompose."""


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues with an orthonormal eigenvector matrix.

    Column m of ``eigenvectors`` pairs with ``eigenvalues[m]``. Eigenvector
    signs are fixed so the first nonzero component is positive, which keeps
    logs reproducible.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class MergedBasis:
    """Orthonormal eigenvector columns for the eigenvalue block 2..m."""

    m: int
    basis: np.ndarray


@dataclass(frozen=True)
class MergedBoundEval:
    """Reduced matrix, merged lower bound, minimizer, and input gradient.

    mu is the minimum over the merged eigenspace of the quadratic form of the
    input-weighted Laplacian derivative; it equals the smallest eigenvalue of
    z. xi is a unit minimizing eigenvector of z, and grad_u is the matching
    generalized-gradient element with respect to the input (one element of
    the subdifferential when the smallest eigenvalue of z is repeated).
    """

    z: np.ndarray
    mu: float
    xi: np.ndarray
    grad_u: np.ndarray


def _fix_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first component larger than tol is positive."""
    out = vectors.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0.0:
            out[:, c] = -col
    return out


def spectral_decompose(laplacian: np.ndarray) -> Spectrum:
    """Full symmetric eigendecomposition with ascending eigenvalues.

    Raises SpectrumError if the input is not symmetric within 1e-10 or the
    underlying LAPACK routine fails to converge.
    """
    L = np.asarray(laplacian, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise SpectrumError(f"expected a square matrix, got shape {L.shape}")
    if np.max(np.abs(L - L.T)) > 1e-10:
        raise SpectrumError("matrix is not symmetric within 1e-10")
    try:
        values, vectors = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hardware dependent
        raise SpectrumError(f"eigendecomposition did not converge: {exc}") from exc
    return Spectrum(eigenvalues=values, eigenvectors=_fix_signs(vectors))


def algebraic_connectivity(state: NetworkState, cfg: ProximityConfig) -> float:
    """Second-smallest Laplacian eigenvalue of the proximity graph at a state."""
    graph = evaluate_graph(state, cfg)
    return float(spectral_decompose(graph.laplacian).eigenvalues[1])


def merged_basis(spectrum: Spectrum, m: int) -> MergedBasis:
    """Eigenvector columns 2..m (1-based), spanning the merged eigenspace."""
    n = spectrum.eigenvalues.size
    if not 2 <= m <= n:
        raise SpectrumError(f"m must lie in [2, {n}], got {m}")
    return MergedBasis(m=m, basis=spectrum.eigenvectors[:, 1:m].copy())


def multiplicity_tolerance(laplacian: np.ndarray) -> float:
    """Tolerance for grouping floating-point-equal eigenvalues."""
    return 1e-8 * max(1.0, float(np.linalg.norm(laplacian, "fro")))


class SpectralWorkspace:
    """Per-state cache shared by repeated input-dependent evaluations.

    Holds the graph evaluation, the spectral decomposition, and the reduced
    quadratic-form tensor R[i] = V^T (dL/dx_i) V so that the reduced matrix
    for any contiguous eigenvalue block is a cheap slice of a tensor
    contraction against the input. Instances are immutable in practice and
    safe to share across threads.
    """

    def __init__(self, state: NetworkState, cfg: ProximityConfig):
        self.state = state
        self.cfg = cfg
        self.graph = evaluate_graph(state, cfg)
        self.spectrum = spectral_decompose(self.graph.laplacian)
        V = self.spectrum.eigenvectors
        reduced = np.einsum("ipq,pa,qb->iab", self.graph.jacobians, V, V)
        self.reduced = 0.5 * (reduced + np.transpose(reduced, (0, 2, 1)))
        self.mult_tol = multiplicity_tolerance(self.graph.laplacian)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def n(self) -> int:
        return self.state.n

    def reduced_form(self, u: np.ndarray) -> np.ndarray:
        """Reduced input-weighted derivative V^T (sum_i u_i dL/dx_i) V."""
        u = np.asarray(u, dtype=float).ravel()
        if u.size != self.state.size:
            raise SpectrumError(
                f"input has {u.size} entries, state has {self.state.size}"
            )
        return np.tensordot(u, self.reduced, axes=(0, 0))

    def block_bound(
        self, u: np.ndarray, lo: int, hi: int, form: np.ndarray | None = None
    ) -> MergedBoundEval:
        """Minimum of the quadratic form over eigenvector columns [lo, hi)."""
        S = self.reduced_form(u) if form is None else form
        z = S[lo:hi, lo:hi]
        if hi - lo == 1:
            mu = float(z[0, 0])
            xi = np.ones(1)
        else:
            values, vectors = np.linalg.eigh(z)
            mu = float(values[0])
            xi = _fix_signs(vectors[:, :1])[:, 0]
        grad = np.einsum("iab,a,b->i", self.reduced[:, lo:hi, lo:hi], xi, xi)
        return MergedBoundEval(z=z, mu=mu, xi=xi, grad_u=grad)

    def merged_bound(
        self, u: np.ndarray, m: int, form: np.ndarray | None = None
    ) -> MergedBoundEval:
        """Merged lower bound over the eigenvalue block 2..m.

        The merged span covers the full eigenspace of every included
        eigenvalue, so when eigenvalue m ties with later ones (within the
        multiplicity tolerance) the block extends through the tie. At
        generic states this is exactly the eigenvector columns 2..m.
        """
        if not 2 <= m <= self.n:
            raise SpectrumError(f"m must lie in [2, {self.n}], got {m}")
        _, hi = self.multiplicity_block(m)
        return self.block_bound(u, 1, hi, form=form)

    def multiplicity_block(self, m: int) -> tuple[int, int]:
        """Contiguous index range of eigenvalues equal to eigenvalue m (1-based)."""
        lam = self.eigenvalues
        idx = m - 1
        lo = idx
        while lo > 0 and abs(lam[lo - 1] - lam[idx]) <= self.mult_tol:
            lo -= 1
        hi = idx + 1
        while hi < lam.size and abs(lam[hi] - lam[idx]) <= self.mult_tol:
            hi += 1
        return lo, hi


def merged_lower_bound(
    state: NetworkState, u: np.ndarray, m: int, cfg: ProximityConfig
) -> MergedBoundEval:
    """Merged lower bound mu over the eigenvalue block 2..m at (state, u)."""
    return SpectralWorkspace(state, cfg).merged_bound(u, m)


def lie_min_rate(
    state: NetworkState, u: np.ndarray, m: int, cfg: ProximityConfig
) -> float:
    """Worst-case rate of change of eigenvalue m under input u.

    Minimizes the quadratic form over the eigenspace of eigenvalue m alone,
    grouping floating-point-equal eigenvalues by ``multiplicity_tolerance``.
    """
    ws = SpectralWorkspace(state, cfg)
    lo, hi = ws.multiplicity_block(m)
    return ws.block_bound(u, lo, hi).mu


def oracle_convex_hull_min(
    state: NetworkState,
    u: np.ndarray,
    m: int,
    samples: int,
    cfg: ProximityConfig,
    rng: np.random.Generator | None = None,
    directions: np.ndarray | None = None,
    running: bool = False,
):
    """Brute-force sampled minimum of the quadratic form over the merged span.

    Each sample draws a random great circle of the merged eigenspace and
    pairs the exact minimum of that circle's outer-product hull with the
    input-weighted Laplacian derivative in the full space (closed-form 2x2
    eigenvalue, no LAPACK), independently of the reduced eigenvalue route.
    ``directions`` optionally supplies explicit coefficient vectors whose
    single-vector quadratic forms are used before any random draws. With
    ``running=True`` the running minimum after each sample is returned
    instead of the final scalar.

    Intended for tests; the sampled minimum can only overshoot the true one.
    """
    if samples < 1:
        raise SpectrumError(f"samples must be >= 1, got {samples}")
    graph = evaluate_graph(state, cfg)
    spectrum = spectral_decompose(graph.laplacian)
    basis = merged_basis(spectrum, m).basis
    M = directional_laplacian_derivative(graph, u)
    k = m - 1

    def forms(coeffs: np.ndarray) -> np.ndarray:
        lifted = coeffs @ basis.T
        return np.einsum("sp,pq,sq->s", lifted, M, lifted)

    values = np.empty(samples)
    given = 0
    if directions is not None:
        coeffs = np.atleast_2d(np.asarray(directions, dtype=float))
        given = min(samples, coeffs.shape[0])
        coeffs = coeffs[:given] / np.linalg.norm(coeffs[:given], axis=1, keepdims=True)
        values[:given] = forms(coeffs)

    todo = samples - given
    if todo:
        if rng is None:
            rng = np.random.default_rng(0)
        if k == 1:
            # one-dimensional span: the only unit directions are +/- the basis
            values[given:] = forms(np.ones((todo, 1)))
        else:
            pair = rng.standard_normal((todo, 2, k))
            a = pair[:, 0]
            a /= np.linalg.norm(a, axis=1, keepdims=True)
            b = pair[:, 1] - np.sum(a * pair[:, 1], axis=1, keepdims=True) * a
            norm_b = np.linalg.norm(b, axis=1, keepdims=True)
            norm_b[norm_b == 0.0] = 1.0
            b /= norm_b
            q_aa = forms(a)
            q_bb = forms(b)
            lifted_a = a @ basis.T
            lifted_b = b @ basis.T
            q_ab = np.einsum("sp,pq,sq->s", lifted_a, M, lifted_b)
            mid = 0.5 * (q_aa + q_bb)
            rad = np.sqrt(0.25 * (q_aa - q_bb) ** 2 + q_ab**2)
            values[given:] = mid - rad
    if running:
        return np.minimum.accumulate(values)
    return float(values.min())
