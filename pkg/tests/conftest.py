import numpy as np
import pytest

from cltlab.chain import center_observable, is_irreducible, period, validate_chain
from cltlab.models import make_two_state


def random_chain(rng, n, sparsity=0.3):
    """Irreducible aperiodic chain with some zero transitions."""
    while True:
        P = rng.dirichlet(np.full(n, 0.7), size=n)
        P[rng.random((n, n)) < sparsity] = 0.0
        sums = P.sum(axis=1)
        if np.any(sums == 0):
            continue
        chain = validate_chain(P / sums[:, None])
        if is_irreducible(chain) and period(chain) == 1:
            return chain


def random_family(seed=2024, count=25, max_states=8):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, max_states + 1))
        chain = random_chain(rng, n)
        xi = center_observable(chain, rng.normal(size=n)).values
        out.append((chain, xi))
    return out


@pytest.fixture(scope="session")
def family():
    return random_family()


@pytest.fixture
def sym():
    """Symmetric two-state chain, p = 0.25, observable (1, -1)."""
    return make_two_state(0.25, 0.25), np.array([1.0, -1.0])


@pytest.fixture
def iid_signs():
    return make_two_state(0.5, 0.5), np.array([1.0, -1.0])


@pytest.fixture
def asym():
    """[[0.75, 0.25], [0.5, 0.5]] with the centred indicator of state 0."""
    chain = validate_chain([[0.75, 0.25], [0.5, 0.5]])
    return chain, np.array([1.0 / 3.0, -2.0 / 3.0])
