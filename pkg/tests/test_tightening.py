import numpy as np
import pytest

from drsmpc import allocate_uniform, psi_dr, psi_empirical, psi_gaussian, tighten
from drsmpc.errors import ValidationError
from drsmpc.tightening import TighteningMode, build_tightening, normalized_margin_samples, spread
from oracles import normal_upper_quantile


def test_uniform_allocation():
    a = allocate_uniform(0.1, 5)
    np.testing.assert_allclose(a.deltas, 0.02)
    assert allocate_uniform(0.5, 1).deltas[0] == 0.5
    a = allocate_uniform(0.1, 20)
    np.testing.assert_allclose(a.deltas, 0.005)
    assert abs(a.deltas.sum() - 0.1) < 1e-15
    for bad in (0.0, 0.6, -0.1):
        with pytest.raises(ValidationError):
            allocate_uniform(bad, 3)


def test_psi_dr_values():
    assert psi_dr(0.5) == 1.0
    assert psi_dr(0.02) == 7.0
    assert psi_dr(0.1) == 3.0
    for bad in (0.0, 0.51, 1.0):
        with pytest.raises(ValidationError):
            psi_dr(bad)


@pytest.mark.parametrize("delta, ref", [(0.05, 1.6448536270), (0.02, 2.0537489106)])
def test_psi_gaussian_against_bisection(delta, ref):
    oracle = normal_upper_quantile(delta)
    assert abs(oracle - ref) < 1e-8
    assert abs(psi_gaussian(delta) - oracle) < 1e-8


def test_psi_gaussian_median_and_domain():
    assert psi_gaussian(0.5) == 0.0
    with pytest.raises(ValidationError):
        psi_gaussian(0.7)


def test_dr_dominates_gaussian():
    grid = np.linspace(0.5, 0.0, 10_000, endpoint=False)[::-1]
    assert np.all(psi_dr(grid) >= psi_gaussian(grid))


def test_psi_empirical():
    rng = np.random.default_rng(11)
    assert abs(psi_empirical(rng.standard_normal(1_000_000), 0.05) - 1.6449) < 0.01
    assert psi_empirical(np.full(20_000, 2.5), 0.1) == 2.5
    coins = np.where(rng.random(10_000) < 0.5, -1.0, 1.0)
    assert psi_empirical(coins, 0.4) == 1.0
    with pytest.raises(ValidationError):
        psi_empirical(np.zeros(10), 0.1)


def test_tighten_examples():
    S = 0.04 * np.eye(2)
    assert tighten([1, 0], 1.0, S, 0.0) == 1.0
    assert tighten([1, 0], 1.0, np.zeros((2, 2)), 5.0) == 1.0
    assert abs(tighten([1, 0], 1.0, S, 3.0) - 0.4) < 1e-15
    with pytest.raises(ValidationError):
        tighten([1, 0], 1.0, np.diag([1.0, -1.0]), 1.0)


def test_spread_matches_quadratic_form():
    rng = np.random.default_rng(5)
    L = rng.normal(size=(4, 4))
    S = L @ L.T
    F = rng.normal(size=(6, 4))
    np.testing.assert_allclose(spread(F, S), np.sqrt(np.einsum("ij,jk,ik->i", F, S, F)), rtol=1e-12)


def test_chance_constraint_frequency():
    # Each tightened row must be violated with frequency at most delta when the
    # mean sits on the tightened boundary.
    rng = np.random.default_rng(7)
    delta = 0.05
    S = np.array([[0.3, 0.1], [0.1, 0.2]])
    f = np.array([1.0, -2.0])
    g = 1.0
    n = 400_000
    L = np.linalg.cholesky(S)
    scale = np.sqrt(0.5)
    lap = rng.laplace(scale=scale, size=(n, 2)) @ L.T
    gau = rng.standard_normal((n, 2)) @ L.T
    for noise in (lap, gau):
        g_dr = tighten(f, g, S, psi_dr(delta))
        x = g_dr * f / (f @ f) + noise
        assert np.mean(x @ f > g) <= delta
    g_g = tighten(f, g, S, psi_gaussian(delta))
    x = g_g * f / (f @ f) + gau
    rate = np.mean(x @ f > g)
    assert abs(rate - delta) < 4 * np.sqrt(delta * (1 - delta) / n)


def test_build_tightening_modes():
    alloc = allocate_uniform(0.1, 4)
    dr = build_tightening("dr", alloc)
    np.testing.assert_allclose(dr.psis, psi_dr(0.025))
    ga = build_tightening(TighteningMode.GAUSSIAN, alloc)
    np.testing.assert_allclose(ga.psis, psi_gaussian(0.025))
    with pytest.raises(ValidationError):
        build_tightening("empirical", alloc)
    rng = np.random.default_rng(2)
    emp = build_tightening("empirical", alloc, lambda n: rng.standard_normal((n, 4)),
                           quantile_samples=200_000)
    np.testing.assert_allclose(emp.psis, psi_gaussian(0.025), atol=0.03)


def test_normalized_margins_have_unit_variance():
    rng = np.random.default_rng(9)
    D = rng.normal(size=(3, 4))
    Sw = np.diag([1.0, 2.0, 0.5, 1.5])
    F = np.vstack([rng.normal(size=(2, 3)), np.zeros((1, 3))])
    W = rng.standard_normal((200_000, 4)) * np.sqrt(np.diag(Sw))
    Z = normalized_margin_samples(F, D, Sw, W)
    np.testing.assert_allclose(Z[:, :2].var(axis=0), 1.0, atol=0.02)
    assert np.all(Z[:, 2] == 0)
