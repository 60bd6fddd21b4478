import numpy as np
import pytest

from mmiqp.core import Instance, LinearConstraint


def random_m_matrix(rng, n, density=0.6, slack=(0.05, 1.0)):
    """Diagonally dominant M-matrix: nonpositive off-diagonals, positive row sums."""
    W = rng.uniform(0, 1, (n, n)) * (rng.uniform(0, 1, (n, n)) < density)
    W = np.triu(W, 1)
    W = W + W.T
    Q = -W
    np.fill_diagonal(Q, W.sum(axis=1) + rng.uniform(*slack, n))
    return Q


def random_instance(rng, n, kind="box", name="rand"):
    Q = random_m_matrix(rng, n)
    a = rng.uniform(0, 1.5, n)
    b = -rng.uniform(0, 3, n)
    u = np.ones(n)
    cons = ()
    if kind == "card":
        cons = (LinearConstraint(np.ones(n), np.zeros(n), "le", float(max(1, n // 2))),)
    elif kind == "budget":
        cons = (LinearConstraint(np.zeros(n), np.ones(n), "ge", 0.3 * n),
                LinearConstraint(np.ones(n), np.zeros(n), "le", float(n - 1)))
    return Instance(name=name, a=a, b=b, Q=Q, u=u, constraints=cons)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
