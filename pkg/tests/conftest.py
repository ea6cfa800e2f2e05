import numpy as np
import pytest

from towgame import payoffs
from towgame.dpp_core import DomainSpec, GridSpec
from towgame.movement_sets import FamilySpec, lattice_ball


@pytest.fixture
def disk():
    return DomainSpec.disk((0.0, 0.0), 1.0, 1.0, 0.2)


@pytest.fixture
def ball():
    return FamilySpec.ball(0.5, 0.5)


@pytest.fixture
def aligned_2d():
    """Lattice ball with h = eps/2 and dt = eps^2/8 alignment (c = 0.5)."""
    return lattice_ball(1.0, 0.5, 2, 2, (0.0, 0.25, -0.25))


def aligned_grid(eps):
    return GridSpec(eps / 2, eps * eps / 8, True)


@pytest.fixture
def norm2():
    return payoffs.norm(2)


def node_error(field, func):
    """Largest |u - func| over interior nodes of every positive-time slice."""
    m = field.interior
    X = field.lattice.coords[m]
    return max(float(np.abs(field.values[k][m] - func(X)).max()) for k in range(1, len(field.times)))


def ordered_pair(seed, dim=2):
    """Random Lipschitz payoffs ``low <= high`` everywhere, built from a seed."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim)
    center = rng.uniform(-1, 1, size=dim)
    w = rng.uniform(0.2, 1.5)
    gap_center = rng.uniform(-1, 1, size=dim)
    k = rng.uniform(0, 0.5)

    def high(X):
        X = np.asarray(X, dtype=float)
        return X @ v + w * np.linalg.norm(X - center, axis=-1)

    def low(X):
        X = np.asarray(X, dtype=float)
        return high(X) - k - 0.5 * np.abs(np.sin(3 * np.linalg.norm(X - gap_center, axis=-1)))

    return payoffs.PayoffField(low, f"low[{seed}]", dim), payoffs.PayoffField(high, f"high[{seed}]", dim)
