import dataclasses
import json

import numpy as np
import pytest

from drsmpc import ExperimentConfig, build_controller, export, load_config, run_monte_carlo, run_paired, sample_noise
from drsmpc.errors import ConfigurationError
from drsmpc.harness import clopper_pearson, summary
from drsmpc.regret import regret_series

FAST = dict(quantile_samples=50_000)


@pytest.fixture(scope="module")
def cfg():
    return ExperimentConfig(**FAST)


@pytest.fixture(scope="module")
def controllers(cfg):
    return (build_controller(cfg, cfg.informed_mode, "fully_informed"), build_controller(cfg, "dr"))


@pytest.fixture(scope="module")
def paired(cfg, controllers):
    return run_paired(cfg, *controllers)


def test_noise_zero_and_deterministic():
    assert np.all(sample_noise("laplacian", np.zeros((2, 2)), 10, 0) == 0)
    a = sample_noise("laplacian", 1e-4 * np.eye(2), 50, 42)
    b = sample_noise("laplacian", 1e-4 * np.eye(2), 50, 42)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_noise("laplacian", 1e-4 * np.eye(2), 50, 43))


@pytest.mark.parametrize("kind", ["laplacian", "gaussian"])
def test_noise_variance(kind):
    W = sample_noise(kind, 1e-4 * np.eye(2), 1_000_000, 3)
    np.testing.assert_allclose(W.var(axis=0), 1e-4, rtol=0.01)
    assert abs(W.mean()) < 1e-4


def test_laplace_tails():
    W = sample_noise("laplacian", np.eye(1), 1_000_000, 5)[:, 0]
    b = np.sqrt(0.5)
    assert np.mean(np.abs(W) > 3 * b) == pytest.approx(np.exp(-3), rel=0.03)


def test_gaussian_noise_correlation():
    S = np.array([[2.0, 0.6], [0.6, 1.0]])
    W = sample_noise("gaussian", S, 400_000, 1)
    np.testing.assert_allclose(np.cov(W.T), S, atol=0.02)


def test_correlated_laplace_rejected():
    with pytest.raises(ConfigurationError):
        sample_noise("laplacian", np.array([[1.0, 0.5], [0.5, 1.0]]), 3, 0)
    with pytest.raises(ConfigurationError):
        sample_noise("cauchy", np.eye(2), 3, 0)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(risk=0.7)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"horizon": 3})
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"N": 4, "seed": 9, "x0": [5.0, 0.0]}))
    c = load_config(path)
    assert c.N == 4 and c.seed == 9 and c.T == 200


def test_paired_run_shape_and_pairing(cfg, paired):
    assert len(paired.star) == len(paired.dagger) == cfg.T + 1
    assert paired.infeasible_at is None
    assert paired.solves == 2 * (cfg.T + 1)
    assert paired.checksums["s"] == paired.checksums["d"]
    np.testing.assert_array_equal(paired.star.states[0], paired.dagger.states[0])
    assert paired.kkt_max <= 1e-7


def test_receding_horizon_first_block(paired):
    for h in (paired.star, paired.dagger):
        np.testing.assert_allclose(h.inputs[:, 0], h.plans[:, 0], atol=1e-12)


def test_dynamics_replay(cfg, paired):
    model = cfg.model()
    for h in (paired.star, paired.dagger):
        x_next = h.states[:-1] @ model.A.T + h.inputs[:-1] @ model.B.T + paired.disturbances
        np.testing.assert_allclose(h.states[1:], x_next, atol=1e-12)


def test_identical_controllers_zero_noise(cfg):
    c = dataclasses.replace(cfg, T=40)
    ctrl = build_controller(c, "gaussian")
    run = run_paired(c, ctrl, ctrl, disturbances=np.zeros((40, 2)))
    np.testing.assert_array_equal(run.star.states, run.dagger.states)
    s = regret_series(run.star, run.dagger, ctrl.model.Q, ctrl.model.R)
    assert np.all(s.closed_loop == 0) and np.all(s.gap == 0)


def test_robust_gap_positive_with_active_state_row(cfg):
    c = dataclasses.replace(cfg, T=10)
    run = run_paired(c, build_controller(c, "gaussian"), build_controller(c, "dr"),
                     disturbances=np.zeros((10, 2)))
    assert any(i >= 10 for i in run.dagger.active_sets[0])
    assert run.dagger.values[0] - run.star.values[0] > 0
    assert not np.array_equal(run.star.states, run.dagger.states)


def test_export_roundtrip(tmp_path, cfg, paired):
    s = regret_series(paired.star, paired.dagger, cfg.model().Q, cfg.model().R)
    export(paired, s, tmp_path / "a", dt=cfg.dt)
    export(paired, s, tmp_path / "b", dt=cfg.dt)
    a = (tmp_path / "a" / "trajectories.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectories.csv").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    lines = a.decode().splitlines()
    assert len(lines) == 202
    assert lines[0].split(",")[:4] == ["k", "t", "x_star_1", "x_star_2"]
    data = json.loads((tmp_path / "a" / "summary.json").read_text())
    for key in ("final_regret", "phi_entry_k", "gap_decay_slope", "regret_increment_tail_max",
                "violations", "infeasible_runs", "conservatism"):
        assert key in data


def test_reruns_are_bit_identical(tmp_path, cfg):
    c = dataclasses.replace(cfg, T=30)
    outs = []
    for tag in ("x", "y"):
        run = run_paired(c)
        s = regret_series(run.star, run.dagger, c.model().Q, c.model().R)
        export(run, s, tmp_path / tag, dt=c.dt)
        outs.append((tmp_path / tag / "trajectories.csv").read_bytes())
    assert outs[0] == outs[1]


def test_infeasible_start_gives_header_only(tmp_path, cfg):
    c = dataclasses.replace(cfg, x0=[12.0, 0.0], informed_mode="gaussian")
    run = run_paired(c)
    assert run.infeasible_at == ("fully_informed", 0)
    s = regret_series(run.star, run.dagger, c.model().Q, c.model().R)
    export(run, s, tmp_path, dt=c.dt, summary_data=summary(run, s))
    assert len((tmp_path / "trajectories.csv").read_text().splitlines()) == 1


def test_monte_carlo_zero_noise(cfg):
    c = dataclasses.replace(cfg, sigma_w=[[0.0, 0.0], [0.0, 0.0]], T=60)
    stats = run_monte_carlo(c, 5, mode="dr")
    assert stats.rate == 0.0 and stats.infeasible_runs == 0
    assert stats.ci_low == 0.0 and stats.ci_high > 0


def test_monte_carlo_parallel_matches_serial(cfg):
    c = dataclasses.replace(cfg, T=40)
    a = run_monte_carlo(c, 6, mode="dr")
    b = run_monte_carlo(c, 6, mode="dr", n_jobs=2)
    assert a == b


def test_clopper_pearson_reference():
    lo, hi = clopper_pearson(0, 500)
    assert lo == 0.0 and hi == pytest.approx(1 - 0.025 ** (1 / 500), rel=1e-9)
    lo, hi = clopper_pearson(500, 500)
    assert hi == 1.0 and lo == pytest.approx(0.025 ** (1 / 500), rel=1e-9)
