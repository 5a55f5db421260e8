import numpy as np
import pytest

from drsmpc import build_lifted_diff, conservatism, tightened_pair
from drsmpc.harness import ExperimentConfig, horizon_conservatism
from drsmpc.polytope import Polytope, erode, support_value, volume
from drsmpc.tightening import RiskAllocation, allocate_uniform, psi_dr, psi_gaussian, tighten_rows

BOX1 = np.array([[1.0], [-1.0]])


def test_zero_covariance_keeps_original_set():
    F = np.vstack([np.eye(2), -np.eye(2)])
    g = np.array([1.0, 2.0, 3.0, 4.0])
    Xt, Xd = tightened_pair(F, g, np.zeros((2, 2)), allocate_uniform(0.1, 4))
    np.testing.assert_array_equal(Xt.g, g)
    np.testing.assert_array_equal(Xd.g, g)


def test_one_dimensional_offsets():
    Xt, Xd = tightened_pair([[1.0]], [1.0], [[1.0]], RiskAllocation(0.1, [0.1]))
    assert Xt.g[0] == pytest.approx(1 - 1.2815515655, abs=1e-9)
    assert Xd.g[0] == pytest.approx(1 - 3.0)
    Xt, Xd = tightened_pair([[1.0]], [1.0], [[4.0]], RiskAllocation(0.5, [0.5]))
    assert Xt.g[0] == 1.0 and Xd.g[0] == pytest.approx(-1.0)


def test_point_self_erosion_has_zero_volume():
    res = conservatism(BOX1, [2.0, 2.0], [[0.0]], RiskAllocation(0.2, [0.1, 0.1]))
    assert res.value == 0.0
    assert support_value(res.eroded, [1.0]) == pytest.approx(0.0)


def test_one_dimensional_box_interval_arithmetic():
    g = np.array([1.0, 1.0])
    alloc = RiskAllocation(0.2, [0.1, 0.1])
    res = conservatism(BOX1, g, [[0.01]], alloc)
    zt = 1.2815515655446004 * 0.1
    hw_true, hw_dr = 1 - zt, 1 - 0.3
    # [-a, a] eroded by [-b, b] is [-(a-b), a-b]
    assert res.value == pytest.approx(2 * (hw_true - hw_dr), abs=1e-9)


def test_median_versus_robust_half_width():
    # per-row risk 0.5: exact constant 0, robust constant 1, spread 1
    g = np.array([5.0, 5.0])
    Xt = Polytope(BOX1, tighten_rows(BOX1, g, [[1.0]], [psi_gaussian(0.5)] * 2))
    Xd = Polytope(BOX1, tighten_rows(BOX1, g, [[1.0]], [psi_dr(0.5)] * 2))
    assert Xt.g.tolist() == [5.0, 5.0] and Xd.g.tolist() == [4.0, 4.0]
    assert volume(erode(Xt, Xd)).value == pytest.approx(2.0)


def test_empty_robust_set_is_flagged():
    res = conservatism(BOX1, [0.1, 0.1], [[1.0]], RiskAllocation(0.1, [0.05, 0.05]))
    assert "subtrahend_empty" in res.flags
    assert res.value == 0.0


def test_nonnegative_on_random_pairs():
    rng = np.random.default_rng(0)
    for i in range(50):
        d = int(rng.integers(1, 3))
        k = int(rng.integers(1, 4))
        F = np.vstack([np.eye(d), -np.eye(d), rng.normal(size=(k, d))])
        g = rng.uniform(1.0, 3.0, F.shape[0])
        L = rng.normal(size=(d, d)) * 0.3
        res = conservatism(F, g, L @ L.T, allocate_uniform(0.2, F.shape[0]),
                           n_samples=20_000, seed=i)
        assert res.value >= 0.0


def test_lifted_representation():
    P = build_lifted_diff([[1.0]], [1.0], [0.0])
    np.testing.assert_array_equal(P.F, [[1, 1], [0, 1]])
    np.testing.assert_array_equal(P.g, [1, 0])
    F = np.vstack([np.eye(2), -np.eye(2)])
    g = np.ones(4)
    assert not build_lifted_diff(F, g, g).is_empty()
    assert build_lifted_diff(F, g, -g).is_empty()


def test_horizon_bookkeeping():
    cfg = ExperimentConfig(quantile_samples=20_000)
    out = horizon_conservatism(cfg, mode="gaussian", n_samples=10_000)
    assert len(out["per_stage"]) == cfg.N
    assert out["value"] >= 0 and all(s["value"] >= 0 for s in out["per_stage"])
    F = np.kron(np.eye(12), np.ones((2, 1)))[:, :12] * np.array([1, -1] * 12)[:, None]
    P = build_lifted_diff(F, np.ones(24), np.ones(24))
    assert P.n_rows == 48 and P.dim == 24
