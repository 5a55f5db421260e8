import numpy as np
import pytest
from scipy.optimize import linprog as scipy_linprog

from drsmpc import lp


def test_matches_scipy_on_random_bounded_lps():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = rng.integers(1, 5)
        m = rng.integers(n + 1, 10)
        A = rng.normal(size=(m, n))
        b = rng.uniform(0.1, 2.0, size=m)
        A = np.vstack([A, np.eye(n), -np.eye(n)])
        b = np.concatenate([b, np.full(2 * n, 5.0)])
        c = rng.normal(size=n)
        ours = lp.linprog(c, A, b)
        ref = scipy_linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
        assert ours.status == lp.OPTIMAL
        assert abs(ours.value - ref.fun) < 1e-7
        assert np.all(A @ ours.x <= b + 1e-8)


def test_infeasible_and_unbounded():
    A = np.array([[1.0], [-1.0]])
    assert lp.linprog([1.0], A, [0.0, -1.0]).status == lp.INFEASIBLE
    assert not lp.is_feasible(A, [0.0, -1.0])
    assert lp.linprog([-1.0, 0.0], np.array([[0.0, 1.0]]), [1.0]).status == lp.UNBOUNDED
    assert lp.is_feasible(A, [1.0, 1.0])


def test_degenerate_vertex_terminates():
    # Many redundant rows through the optimal vertex.
    ang = np.linspace(0, np.pi / 2, 12)
    A = np.vstack([np.c_[np.cos(ang), np.sin(ang)], -np.eye(2)])
    b = np.concatenate([np.zeros(12), np.ones(2)])
    res = lp.linprog([-1.0, -1.0], A, b)
    assert res.status == lp.OPTIMAL
    assert res.value == pytest.approx(0.0, abs=1e-9)
