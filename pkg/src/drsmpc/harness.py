"""Paired closed-loop experiments under a shared disturbance realization.

Random streams come from numpy's counter-based Philox generator keyed by
``(seed, stream)``: stream 0 drives the closed-loop disturbances and stream 1
the samples behind empirical quantiles.  Uniforms are formed from 53-bit
integers as ``(k + 0.5) / 2**53`` and mapped through inverse CDFs, so the
seed-to-noise mapping does not depend on numpy's distribution samplers.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri
from scipy.stats import beta as beta_dist

from .conservatism import conservatism as conservatism_volume
from .errors import ConfigurationError, InfeasibleError
from .lti_model import PredictionMatrices, SystemModel, build_prediction_matrices, step, \
    stacked_noise_covariance
from .polytope import Polytope
from .qp import HorizonConstraints, QPSolution, build_horizon_constraints, solve_active_set, stage_rows
from .regret import (ControllerHistory, RegretSeries, convergence_report, gap_closed_form,
                     lambda_terms_for, matched_steps)
from .tightening import (RiskAllocation, TighteningMode, TighteningSpec, allocate_uniform, build_tightening,
                         normalized_margin_samples, psd_sqrt)

NOISE_STREAM = 0
QUANTILE_STREAM = 1
_U53 = float(2**53)
MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int = NOISE_STREAM) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & MASK64, int(stream) & MASK64]))


def _uniform_open(rng, shape):
    return (rng.integers(0, 2**53, size=shape, dtype=np.uint64).astype(float) + 0.5) / _U53


def sample_noise(kind: str, sigma_w, T: int, seed: int, stream: int = NOISE_STREAM) -> np.ndarray:
    """``T x n`` zero-mean disturbances with covariance ``sigma_w``.

    ``laplacian`` draws independent Laplace components with scale
    ``sqrt(var/2)`` and therefore needs a diagonal covariance.
    """
    sigma_w = np.atleast_2d(np.asarray(sigma_w, dtype=float))
    n = sigma_w.shape[0]
    rng = make_rng(seed, stream)
    U = _uniform_open(rng, (T, n))
    if kind == "laplacian":
        if np.any(np.abs(sigma_w - np.diag(np.diag(sigma_w))) > 0):
            raise ConfigurationError("correlated Laplacian noise is not supported")
        scale = np.sqrt(np.diag(sigma_w) / 2.0)
        c = U - 0.5
        return -scale * np.sign(c) * np.log1p(-2.0 * np.abs(c))
    if kind == "gaussian":
        return ndtri(U) @ psd_sqrt(sigma_w).T
    raise ConfigurationError(f"unknown noise kind {kind!r}")


@dataclass
class ExperimentConfig:
    """Settings of one experiment; defaults reproduce the double-integrator study."""

    A: list = field(default_factory=lambda: [[1.0, 0.05], [0.0, 1.0]])
    B: list = field(default_factory=lambda: [[0.0], [0.05]])
    dt: float = 0.05
    sigma_w: list = field(default_factory=lambda: [[1e-4, 0.0], [0.0, 1e-4]])
    Q: list = field(default_factory=lambda: [[1.0, 0.0], [0.0, 0.1]])
    R: list = field(default_factory=lambda: [[0.1]])
    Qf: list | None = None
    N: int = 5
    T: int = 200
    risk: float = 0.1
    informed_mode: str = "empirical"
    dr_mode: str = "dr"
    noise: str = "laplacian"
    input_F: list = field(default_factory=lambda: [[1.0], [-1.0]])
    input_g: list = field(default_factory=lambda: [2.0, 20.0])
    state_F: list = field(default_factory=lambda: [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    state_g: list = field(default_factory=lambda: [11.0, 1.5, 4.0, 4.0])
    x0: list = field(default_factory=lambda: [10.0, 0.0])
    seed: int = 0
    runs: int = 500
    quantile_samples: int = 1_000_000

    def __post_init__(self):
        if not 0.0 < self.risk <= 0.5:
            raise ConfigurationError("risk budget must lie in (0, 0.5]")
        if self.T < 1 or self.N < 1:
            raise ConfigurationError("T and N must be positive")
        for mode in (self.informed_mode, self.dr_mode):
            TighteningMode(mode)

    def model(self) -> SystemModel:
        return SystemModel(A=np.array(self.A), B=np.array(self.B), sigma_w=np.array(self.sigma_w),
                           Q=np.array(self.Q), R=np.array(self.R),
                           Qf=None if self.Qf is None else np.array(self.Qf), dt=self.dt)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


class Controller:
    """Receding-horizon SMPC with a fixed tightening rule."""

    def __init__(self, model: SystemModel, pred: PredictionMatrices, constraints: HorizonConstraints,
                 tightening: TighteningSpec, kind: str):
        self.model = model
        self.pred = pred
        self.constraints = constraints
        self.tightening = tightening
        self.kind = kind

    def qp(self, x):
        return self.constraints.qp(self.pred, x, self.model.sigma_w)

    def solve(self, x, warm_start=None) -> QPSolution:
        return solve_active_set(self.qp(x), warm_start=warm_start)


def build_controller(config: ExperimentConfig, mode: str, kind: str | None = None,
                     model: SystemModel | None = None) -> Controller:
    model = model or config.model()
    pred = build_prediction_matrices(model, config.N)
    F, g = stage_rows(config.state_F, config.state_g, config.N)
    allocation = allocate_uniform(config.risk, F.shape[0])
    sigma_ws = stacked_noise_covariance(model.sigma_w, config.N)

    def sampler(n_samples):
        draws = sample_noise(config.noise, model.sigma_w, n_samples * config.N, config.seed,
                             stream=QUANTILE_STREAM)
        return normalized_margin_samples(F, pred.Dbold, sigma_ws, draws.reshape(n_samples, -1))

    spec = build_tightening(mode, allocation, margin_sampler=sampler,
                            quantile_samples=config.quantile_samples)
    input_poly = Polytope(np.kron(np.eye(config.N), np.atleast_2d(np.array(config.input_F, dtype=float))),
                          np.tile(np.array(config.input_g, dtype=float), config.N))
    hc = build_horizon_constraints(pred, input_poly, F, g, spec.psis, sigma_w=model.sigma_w)
    return Controller(model, pred, hc, spec, kind or mode)


@dataclass
class PairedTrajectories:
    star: ControllerHistory
    dagger: ControllerHistory
    disturbances: np.ndarray
    infeasible_at: tuple | None = None
    checksums: dict = field(default_factory=dict)
    kkt_max: float = 0.0
    solves: int = 0


def _digest(rows: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(rows, dtype=np.float64).tobytes()).hexdigest()


def _history(kind, dims, xs, us, vals, acts, plans):
    k = len(vals)
    n, m, Nm = dims
    return ControllerHistory(np.array(xs).reshape(k, n), np.array(us).reshape(k, m), vals, acts, kind,
                             plans=np.array(plans).reshape(k, Nm))


def run_paired(config: ExperimentConfig, star: Controller | None = None,
               dagger: Controller | None = None, disturbances=None) -> PairedTrajectories:
    """Simulate both controllers from ``x0`` with identical disturbance rows.

    Each controller solves its QP at its own realized state for ``k = 0..T``
    and the first input block is applied; ``T`` transitions consume the ``T``
    disturbance rows.  On infeasibility both histories are truncated to the
    common feasible prefix.
    """
    model = config.model()
    star = star or build_controller(config, config.informed_mode, "fully_informed", model)
    dagger = dagger or build_controller(config, config.dr_mode, "dr", model)
    m = model.m
    W = sample_noise(config.noise, model.sigma_w, config.T, config.seed) if disturbances is None \
        else np.asarray(disturbances, dtype=float)
    if W.shape != (config.T, model.n):
        raise ConfigurationError("disturbance matrix has the wrong shape")

    logs = {"s": ([], [], [], [], []), "d": ([], [], [], [], [])}
    x = {"s": np.array(config.x0, dtype=float), "d": np.array(config.x0, dtype=float)}
    warm = {"s": None, "d": None}
    ctrl = {"s": star, "d": dagger}
    consumed = {"s": [], "d": []}
    infeasible_at = None
    kkt_max = 0.0
    solves = 0
    for k in range(config.T + 1):
        sols = {}
        for key in ("s", "d"):
            try:
                sols[key] = ctrl[key].solve(x[key], warm[key])
            except InfeasibleError:
                infeasible_at = (ctrl[key].kind, k)
                break
            solves += 1
        if infeasible_at is not None:
            break
        for key in ("s", "d"):
            sol = sols[key]
            kkt_max = max(kkt_max, sol.kkt.max())
            xs, us, vals, acts, plans = logs[key]
            xs.append(x[key].copy())
            us.append(sol.u[:m].copy())
            vals.append(sol.value)
            acts.append(sol.active_set)
            plans.append(sol.u.copy())
            warm[key] = sol.active_set
        if k == config.T:
            break
        for key in ("s", "d"):
            consumed[key].append(W[k])
            x[key] = step(model, x[key], logs[key][1][-1], W[k])

    dims = (model.n, m, config.N * m)
    return PairedTrajectories(
        star=_history(star.kind, dims, *logs["s"]),
        dagger=_history(dagger.kind, dims, *logs["d"]),
        disturbances=W,
        infeasible_at=infeasible_at,
        checksums={key: _digest(np.array(v).reshape(-1, model.n)) for key, v in consumed.items()},
        kkt_max=kkt_max,
        solves=solves,
    )


@dataclass
class ViolationStats:
    runs: int
    violating_runs: int
    infeasible_runs: int
    rate: float
    ci_low: float
    ci_high: float
    violating_states: int = 0


def clopper_pearson(k: int, n: int, level: float = 0.95):
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(beta_dist.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


_CONTROLLER_CACHE: dict = {}


def _cached_controller(config: ExperimentConfig, mode: str) -> Controller:
    key = (json.dumps(config.to_dict(), sort_keys=True), mode)
    if key not in _CONTROLLER_CACHE:
        _CONTROLLER_CACHE.clear()
        _CONTROLLER_CACHE[key] = build_controller(config, mode)
    return _CONTROLLER_CACHE[key]


def _single_run(args):
    config, mode, run_index = args
    ctrl = _cached_controller(config, mode)
    model = ctrl.model
    seed = (int(config.seed) ^ int(run_index)) & MASK64
    W = sample_noise(config.noise, model.sigma_w, config.T, seed)
    F = np.atleast_2d(np.array(config.state_F, dtype=float))
    g = np.array(config.state_g, dtype=float)
    x = np.array(config.x0, dtype=float)
    warm = None
    bad_states = 0
    for k in range(config.T):
        try:
            sol = ctrl.solve(x, warm)
        except InfeasibleError:
            return bad_states, True
        warm = sol.active_set
        x = step(model, x, sol.u[:model.m], W[k])
        bad_states += int(np.any(F @ x > g))
    return bad_states, False


def run_monte_carlo(config: ExperimentConfig, n_runs: int | None = None, mode: str | None = None,
                    n_jobs: int = 1) -> ViolationStats:
    """Fraction of closed-loop runs whose realized states ever leave the untightened set.

    Run ``i`` uses the noise seed ``seed XOR i``.  Infeasible runs are
    counted separately and excluded from the rate.
    """
    n_runs = config.runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ConfigurationError("need at least one run")
    mode = mode or config.dr_mode
    jobs = [(config, mode, i) for i in range(n_runs)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_single_run, jobs))
    else:
        results = [_single_run(j) for j in jobs]
    infeasible = sum(1 for _, inf in results if inf)
    feasible = [b for b, inf in results if not inf]
    violating = sum(1 for b in feasible if b > 0)
    n = len(feasible)
    lo, hi = clopper_pearson(violating, n) if n else (0.0, 1.0)
    return ViolationStats(n_runs, violating, infeasible, violating / n if n else float("nan"),
                          lo, hi, sum(feasible))


CSV_FIELDS_FIXED = ("J_star", "J_dagger", "regret_cl", "gap", "active_star", "active_dagger", "matched")


def csv_header(n: int, m: int) -> list:
    return (["k", "t"] + [f"x_star_{i + 1}" for i in range(n)] + [f"x_dagger_{i + 1}" for i in range(n)]
            + [f"u_star_{i + 1}" for i in range(m)] + [f"u_dagger_{i + 1}" for i in range(m)]
            + list(CSV_FIELDS_FIXED))


def _fmt(x: float) -> str:
    return repr(float(x))


def summary(run: PairedTrajectories, series: RegretSeries, violations: ViolationStats | None = None,
            conservatism: dict | None = None, extra: dict | None = None) -> dict:
    diag = None
    if series.phi_entry is not None and len(series.gap):
        diag = convergence_report(series)
    out = {
        "final_regret": float(series.closed_loop[-1]) if len(series.closed_loop) else None,
        "phi_entry_k": series.phi_entry,
        "gap_decay_slope": diag.gap_decay_slope if diag else None,
        "regret_increment_tail_max": diag.regret_increment_tail_max if diag else None,
        "violations": dataclasses.asdict(violations) if violations else None,
        "infeasible_runs": violations.infeasible_runs if violations else None,
        "conservatism": conservatism,
        "infeasible_at": list(run.infeasible_at) if run.infeasible_at else None,
        "disturbance_checksums": run.checksums,
    }
    if extra:
        out.update(extra)
    return out


def export(run: PairedTrajectories, series: RegretSeries, path, dt: float = 1.0, summary_data=None):
    """Write ``trajectories.csv`` and ``summary.json`` into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n, m = run.star.states.shape[1], run.star.inputs.shape[1]
    matched = set(series.matched_steps)
    csv_path = path / "trajectories.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(n, m))
        for k in range(len(run.star)):
            s, d = run.star, run.dagger
            writer.writerow(
                [k, _fmt(k * dt)]
                + [_fmt(v) for v in s.states[k]] + [_fmt(v) for v in d.states[k]]
                + [_fmt(v) for v in s.inputs[k]] + [_fmt(v) for v in d.inputs[k]]
                + [_fmt(s.values[k]), _fmt(d.values[k]), _fmt(series.closed_loop[k]), _fmt(series.gap[k]),
                   ";".join(str(i) for i in s.active_sets[k]), ";".join(str(i) for i in d.active_sets[k]),
                   int(k in matched)]
            )
    json_path = path / "summary.json"
    with open(json_path, "w") as fh:
        json.dump(summary_data if summary_data is not None else summary(run, series), fh, indent=2,
                  sort_keys=True, default=_json_default)
        fh.write("\n")
    return csv_path, json_path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def horizon_conservatism(config: ExperimentConfig, mode: str | None = None, n_samples: int = 1_000_000):
    """Conservatism of the stacked state constraints over stages ``1..N``.

    Returns the lifted-space result together with the per-stage 2-D values.
    """
    model = config.model()
    pred = build_prediction_matrices(model, config.N)
    F, g = stage_rows(config.state_F, config.state_g, config.N)
    allocation = allocate_uniform(config.risk, F.shape[0])
    Sigma_x = pred.Dbold @ stacked_noise_covariance(model.sigma_w, config.N) @ pred.Dbold.T
    mode = mode or config.informed_mode
    exact = build_controller(config, mode, model=model).tightening.psis
    n = model.n
    # drop the deterministic stage-0 coordinates: both sets coincide there
    sl = slice(n, (config.N + 1) * n)
    res = conservatism_volume(F[:, sl], g, Sigma_x[sl, sl], allocation, exact_psis=exact,
                              n_samples=n_samples, seed=config.seed)
    per_stage = []
    rows = len(config.state_g)
    for s in range(config.N):
        r = slice(s * rows, (s + 1) * rows)
        c = slice(s * n, (s + 1) * n)
        Fs = np.array(config.state_F, dtype=float)
        st = conservatism_volume(Fs, g[r], Sigma_x[sl, sl][c, c],
                                 RiskAllocation(allocation.total, allocation.deltas[r]),
                                 exact_psis=exact[r], n_samples=n_samples, seed=config.seed)
        per_stage.append(st.to_dict())
    out = res.to_dict()
    out["per_stage"] = per_stage
    out["mode"] = mode
    return out


def verify_gap_closed_form(run: PairedTrajectories, star: Controller, dagger: Controller):
    """Evaluate the matched-active-set gap expression at every matched step.

    Returns ``(k, closed_form, solved_gap)`` triples; the solved gap is the
    difference of the two QP optimal values.
    """
    out = []
    hs, hd = star.constraints, dagger.constraints
    n_in = hs.n_input
    for k in matched_steps(run.star, run.dagger):
        act = run.star.active_sets[k]
        xs, xd = run.star.states[k], run.dagger.states[k]
        H = star.qp(xs).H
        terms = lambda_terms_for(hs, star.pred, H, act)
        st = np.array([i - n_in for i in sorted(act) if i >= n_in], dtype=int)
        closed = gap_closed_form(terms, xs, xd, hs.psi[st], hd.psi[st], hs.v[st])
        out.append((k, closed, float(run.dagger.values[k] - run.star.values[k])))
    return out
