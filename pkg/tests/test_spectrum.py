import numpy as np
import pytest

from connmaint.checks import random_connected_state
from connmaint.graph import NetworkState, evaluate_graph
from connmaint.spectrum import (
    SpectralWorkspace,
    SpectrumError,
    algebraic_connectivity,
    lie_min_rate,
    merged_basis,
    merged_lower_bound,
    oracle_convex_hull_min,
    spectral_decompose,
)

K4_LAPLACIAN = 4.0 * np.eye(4) - np.ones((4, 4))

# regular tetrahedron: the one fully symmetric 4-robot configuration, where
# every nonzero Laplacian eigenvalue coincides
TETRA = 0.5 * np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
)


def test_two_node_spectrum(cfg):
    state = NetworkState.from_rows(np.array([[0.0, 0.0], [1.0, 0.0]]))
    graph = evaluate_graph(state, cfg)
    spec = spectral_decompose(graph.laplacian)
    w = graph.adjacency[0, 1]
    np.testing.assert_allclose(spec.eigenvalues, [0.0, 2.0 * w], atol=1e-12)
    np.testing.assert_allclose(spec.eigenvectors[:, 0], np.ones(2) / np.sqrt(2.0))


def test_k4_spectrum():
    spec = spectral_decompose(K4_LAPLACIAN)
    np.testing.assert_allclose(spec.eigenvalues, [0.0, 4.0, 4.0, 4.0], atol=1e-12)


def test_reconstruction(rng):
    a = rng.standard_normal((6, 6))
    sym = 0.5 * (a + a.T)
    spec = spectral_decompose(sym)
    recon = spec.eigenvectors @ np.diag(spec.eigenvalues) @ spec.eigenvectors.T
    assert np.linalg.norm(recon - sym) < 1e-8
    assert np.all(np.diff(spec.eigenvalues) >= 0.0)
    assert np.linalg.norm(spec.eigenvectors.T @ spec.eigenvectors - np.eye(6)) < 1e-9


def test_decompose_rejects_nonsymmetric():
    with pytest.raises(SpectrumError):
        spectral_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(SpectrumError):
        spectral_decompose(np.zeros((2, 3)))


def test_decompose_deterministic(rng):
    a = rng.standard_normal((5, 5))
    sym = 0.5 * (a + a.T)
    s1 = spectral_decompose(sym)
    s2 = spectral_decompose(sym.copy())
    np.testing.assert_array_equal(s1.eigenvalues, s2.eigenvalues)
    np.testing.assert_array_equal(s1.eigenvectors, s2.eigenvectors)


def test_algebraic_connectivity_values(cfg):
    state = NetworkState.from_rows(np.array([[0.0, 0.0], [1.0, 0.0]]))
    w = evaluate_graph(state, cfg).adjacency[0, 1]
    assert algebraic_connectivity(state, cfg) == pytest.approx(2.0 * w, abs=1e-12)
    # two far-separated pairs: disconnected, so the value drops to zero
    far = NetworkState.from_rows(
        np.array([[0.0, 0.0], [0.5, 0.0], [10.0, 0.0], [10.5, 0.0]])
    )
    assert algebraic_connectivity(far, cfg) == pytest.approx(0.0, abs=1e-12)


def test_merged_basis_full_complement():
    spec = spectral_decompose(K4_LAPLACIAN)
    basis = merged_basis(spec, 4).basis
    assert basis.shape == (4, 3)
    # orthogonal complement of the constant eigenvector
    assert np.max(np.abs(basis.T @ np.ones(4))) < 1e-12
    np.testing.assert_allclose(K4_LAPLACIAN @ basis, 4.0 * basis, atol=1e-8)


def test_merged_basis_fiedler(cfg, rng):
    state = random_connected_state(rng, 4, cfg)
    spec = spectral_decompose(evaluate_graph(state, cfg).laplacian)
    basis = merged_basis(spec, 2).basis
    np.testing.assert_allclose(basis[:, 0], spec.eigenvectors[:, 1])
    with pytest.raises(SpectrumError):
        merged_basis(spec, 1)
    with pytest.raises(SpectrumError):
        merged_basis(spec, 5)


def test_merged_bound_zero_input(cfg, rng):
    state = random_connected_state(rng, 4, cfg)
    out = merged_lower_bound(state, np.zeros(8), 3, cfg)
    assert out.mu == 0.0
    assert np.max(np.abs(out.z)) == 0.0
    assert np.linalg.norm(out.xi) == pytest.approx(1.0, abs=1e-10)


def test_merged_bound_homogeneity(cfg, rng):
    state = random_connected_state(rng, 4, cfg)
    u = rng.standard_normal(8)
    base = merged_lower_bound(state, u, 4, cfg)
    doubled = merged_lower_bound(state, 2.0 * u, 4, cfg)
    assert doubled.mu == pytest.approx(2.0 * base.mu, rel=1e-12)
    zvals = np.linalg.eigvalsh(base.z)
    if zvals[1] - zvals[0] > 1e-8:
        np.testing.assert_allclose(np.abs(doubled.xi), np.abs(base.xi), atol=1e-8)


def test_merged_bound_dimension_mismatch(cfg, rng):
    state = random_connected_state(rng, 4, cfg)
    with pytest.raises(SpectrumError):
        merged_lower_bound(state, np.zeros(7), 3, cfg)


def test_nesting(cfg, rng):
    for _ in range(50):
        n = int(rng.integers(3, 7))
        state = random_connected_state(rng, n, cfg)
        u = rng.standard_normal(state.size)
        ws = SpectralWorkspace(state, cfg)
        mus = [ws.merged_bound(u, m).mu for m in range(2, n + 1)]
        assert all(mus[i + 1] <= mus[i] + 1e-10 for i in range(len(mus) - 1))


def test_concavity(cfg, rng):
    for _ in range(100):
        n = int(rng.integers(3, 6))
        state = random_connected_state(rng, n, cfg)
        ws = SpectralWorkspace(state, cfg)
        u1 = rng.standard_normal(state.size)
        u2 = rng.standard_normal(state.size)
        gamma = float(rng.uniform())
        for m in range(2, n + 1):
            lhs = ws.merged_bound(gamma * u1 + (1 - gamma) * u2, m).mu
            rhs = gamma * ws.merged_bound(u1, m).mu + (1 - gamma) * ws.merged_bound(u2, m).mu
            assert lhs >= rhs - 1e-9


def test_gradient_directional_derivative(cfg, rng):
    h = 1e-6
    done = 0
    while done < 40:
        n = int(rng.integers(3, 6))
        state = random_connected_state(rng, n, cfg)
        ws = SpectralWorkspace(state, cfg)
        u = rng.standard_normal(state.size)
        m = int(rng.integers(2, n + 1))
        bound = ws.merged_bound(u, m)
        if bound.z.shape[0] > 1:
            zvals = np.linalg.eigvalsh(bound.z)
            if zvals[1] - zvals[0] <= 1e-6:
                continue
        du = rng.standard_normal(state.size)
        du /= np.linalg.norm(du)
        fd = (ws.merged_bound(u + h * du, m).mu - ws.merged_bound(u - h * du, m).mu) / (2 * h)
        analytic = float(bound.grad_u @ du)
        assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-8)
        done += 1


def test_lie_min_rate_simple(cfg, rng):
    state = random_connected_state(rng, 4, cfg)
    ws = SpectralWorkspace(state, cfg)
    u = rng.standard_normal(8)
    # generic state: every eigenvalue simple, so the rate is a plain quadratic form
    assert np.all(np.diff(ws.eigenvalues) > 1e-6)
    graph = evaluate_graph(state, cfg)
    M = np.tensordot(u, graph.jacobians, axes=(0, 0))
    for m in range(2, 5):
        v = ws.spectrum.eigenvectors[:, m - 1]
        assert lie_min_rate(state, u, m, cfg) == pytest.approx(float(v @ M @ v), abs=1e-10)
    assert lie_min_rate(state, np.zeros(8), 2, cfg) == 0.0


def test_lie_min_rate_merged_eigenspace(cfg, rng):
    # all nonzero eigenvalues coincide, so the single-eigenvalue rate equals
    # the full merged bound; cross-check both against the sampled oracle
    state = NetworkState(TETRA.ravel(), (3, 3, 3, 3))
    ws = SpectralWorkspace(state, cfg)
    lam = ws.eigenvalues
    assert lam[3] - lam[1] < 1e-10
    u = rng.standard_normal(12)
    rate = lie_min_rate(state, u, 2, cfg)
    merged = ws.merged_bound(u, 4).mu
    assert rate == pytest.approx(merged, abs=1e-12)
    sampled = oracle_convex_hull_min(state, u, 4, 200000, cfg, rng=rng)
    assert merged <= sampled + 1e-9
    assert sampled - merged < 1e-3


def test_oracle_never_undershoots(cfg, rng):
    for _ in range(20):
        n = int(rng.integers(3, 6))
        state = random_connected_state(rng, n, cfg)
        u = rng.standard_normal(state.size)
        m = int(rng.integers(2, n + 1))
        mu = merged_lower_bound(state, u, m, cfg).mu
        assert oracle_convex_hull_min(state, u, m, 2000, cfg, rng=rng) >= mu - 1e-9


def test_oracle_at_minimizer(cfg, rng):
    state = random_connected_state(rng, 5, cfg)
    u = rng.standard_normal(10)
    out = merged_lower_bound(state, u, 4, cfg)
    value = oracle_convex_hull_min(state, u, 4, 1, cfg, directions=out.xi)
    assert value == pytest.approx(out.mu, abs=1e-9)


def test_oracle_running_minimum(cfg, rng):
    state = random_connected_state(rng, 5, cfg)
    u = rng.standard_normal(10)
    mu = merged_lower_bound(state, u, 5, cfg).mu
    running = oracle_convex_hull_min(state, u, 5, 20000, cfg, rng=rng, running=True)
    assert running.shape == (20000,)
    assert np.all(np.diff(running) <= 0.0)
    assert np.all(running >= mu - 1e-9)
    assert running[-1] - mu < 1e-2
    with pytest.raises(SpectrumError):
        oracle_convex_hull_min(state, u, 5, 0, cfg)


def test_bound_continuity_along_path(cfg, rng):
    # smooth path with a persistent gap above the merged block: difference
    # quotients of mu stay bounded relative to the path median
    while True:
        state = random_connected_state(rng, 4, cfg)
        ws = SpectralWorkspace(state, cfg)
        if ws.eigenvalues[2] - ws.eigenvalues[1] > 0.3:
            break
    u = rng.standard_normal(8)
    u /= np.linalg.norm(u)
    direction = rng.standard_normal(8)
    direction *= 0.15 / np.linalg.norm(direction)
    svals = np.linspace(0.0, 1.0, 81)
    mus = []
    for s in svals:
        st = state.with_positions(state.positions + s * direction)
        w = SpectralWorkspace(st, cfg)
        assert w.eigenvalues[2] - w.eigenvalues[1] > 0.1
        mus.append(w.merged_bound(u, 2).mu)
    quotients = np.abs(np.diff(mus)) / (svals[1] - svals[0])
    assert quotients.max() <= 10.0 * max(np.median(quotients), 1e-12)
