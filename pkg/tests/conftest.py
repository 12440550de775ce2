import numpy as np
import pytest

from rwsre.environment import DriftLaw, Environment, EnvironmentSpec, GapLaw


@pytest.fixture(scope="session")
def drift_a():
    """lambda = 1/3 w.p. 1/3, 3/4 w.p. 2/3 (Kesten exponent ~ 1.35)."""
    return DriftLaw(atoms=[(1 / 3, 1 / 3), (3 / 4, 2 / 3)])


@pytest.fixture(scope="session")
def drift_b():
    """lambda = 1/3 w.p. 1/4, 3/4 w.p. 3/4 (Kesten exponent ~ 1.85)."""
    return DriftLaw(atoms=[(1 / 3, 1 / 4), (3 / 4, 3 / 4)])


@pytest.fixture(scope="session")
def spec15(drift_a):
    return EnvironmentSpec(gap_law=GapLaw(beta=1.5), drift_law=drift_a)


@pytest.fixture(scope="session")
def spec08(drift_b):
    return EnvironmentSpec(gap_law=GapLaw(beta=0.8), drift_law=drift_b)


def small_env(spec, xi, lam, pad=20, w_tol=1e-12):
    """Environment from explicit right-side arrays plus a rightward-drifting
    left pad so direct walks never fall off the window."""
    xi = [2] * pad + list(xi)
    lam = [0.75] * pad + list(lam)
    return Environment.from_arrays(
        spec, k_min=-pad, xi=np.array(xi), lam=np.array(lam), w_tol=w_tol)


@pytest.fixture(scope="session")
def env_small(spec15):
    return small_env(spec15, xi=[2, 3, 1, 5, 2, 3], lam=[0.75, 0.75, 1 / 3, 0.75, 1 / 3, 0.75])
