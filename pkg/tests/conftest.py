import numpy as np
import pytest

from connmaint.constraints import BarrierParams
from connmaint.graph import NetworkState, ProximityConfig
from connmaint.sim import Scenario
from connmaint.solver import SaddleParams


@pytest.fixture
def cfg():
    return ProximityConfig(cutoff=2.0, sigma=2.0, taper=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def quick_scenario(max_steps=400) -> Scenario:
    """Small three-robot scenario that completes in well under a second."""
    ang = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    pos = 0.45 * np.column_stack([np.cos(ang), np.sin(ang)])
    tgt = 0.78 * np.column_stack([np.cos(ang), np.sin(ang)])
    return Scenario(
        initial_state=NetworkState.from_rows(pos),
        targets=tgt.ravel(),
        priority_order=(0, 1, 2),
        proximity=ProximityConfig(cutoff=2.0, sigma=2.0, taper=0.4),
        barrier=BarrierParams(epsilon=0.1, alpha_slope=1.0),
        v_nom=0.5,
        k_frac=0.75,
        target_radius=0.15,
        dt=0.01,
        max_steps=max_steps,
        solver=SaddleParams(step=0.02, max_iters=2000, kkt_tol=1e-5),
    )
