"""Scenario configuration, simulation runs, Monte Carlo studies, and probes.

The gain/covariance recursion never looks at data, so a full schedule of
gains, fusion weights, and predicted covariances is computed once per
configuration and shared by every Monte Carlo run; each run then only
advances the truth, draws noises, and applies the precomputed gains.

Per-run randomness comes from a splittable seed: run j of base seed s uses
the generator seeded by SeedSequence(s, spawn_key=(j,)). Runs are therefore
independent and reproducible regardless of execution order or worker count.
"""

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import baseline, cross_covariance, fusion, local_estimator
from .attack import (AttackSpec, assemble_measurement, attack_trace,
                     inject_attack, none_attack)
from .errors import ConfigurationError, FusionError, SecFusionError
from .linalg import load_covariance, psd_factor
from .local_estimator import LocalInit
from .model import (SensorSpec, SystemModel, build_augmented_subsystem,
                    build_enhanced_sensor, check_observability)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    """Everything needed to run one scenario.

    strong_map, attacks and eta accept partial dictionaries keyed by weak
    sensor id; missing entries fall back to all strong sensors in id order,
    no attack, and eta = 1 respectively.
    """

    system: SystemModel
    sensors: list
    strong_map: dict = None
    attacks: dict = None
    eta: object = None
    local_init: dict = field(default_factory=dict)
    cross_init: dict = field(default_factory=dict)
    x0_mean: np.ndarray = None
    x0_cov: np.ndarray = None
    horizon: int = 100
    runs: int = 500
    seed: int = 1
    q_theta: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        n = self.system.n
        ids = [s.id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate sensor ids in {sorted(ids)}")
        for s in self.sensors:
            if s.n != n:
                raise ConfigurationError(
                    f"sensor {s.id} has {s.n} state columns, system has {n}")
        self.by_id = {s.id: s for s in self.sensors}
        self.weak_ids = sorted(s.id for s in self.sensors
                               if s.defense == "weak")
        self.strong_ids = sorted(s.id for s in self.sensors
                                 if s.defense == "strong")
        if not self.weak_ids:
            raise ConfigurationError("at least one weak sensor is required")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")

        strong_map = dict(self.strong_map or {})
        for i in list(strong_map):
            for j in strong_map[i]:
                if j not in self.by_id:
                    raise ConfigurationError(
                        f"weak sensor {i} references unknown sensor {j}")
                if self.by_id[j].defense != "strong":
                    raise ConfigurationError(
                        f"weak sensor {i} references sensor {j}, which is "
                        "not strong-defense")
        self.strong_map = {
            i: tuple(strong_map.get(i, self.strong_ids))
            for i in self.weak_ids
        }

        attacks = dict(self.attacks or {})
        for i, spec in attacks.items():
            if i not in self.weak_ids:
                raise ConfigurationError(
                    f"attack declared on sensor {i}, which is not a weak "
                    "sensor")
            if spec.p != self.by_id[i].p:
                raise ConfigurationError(
                    f"attack on sensor {i} has dimension {spec.p}, sensor "
                    f"has {self.by_id[i].p}")
        self.attacks = {
            i: attacks.get(i, none_attack(i, self.by_id[i].p))
            for i in self.weak_ids
        }

        if self.eta is None:
            eta_map = {}
        elif np.ndim(self.eta) == 0 and not isinstance(self.eta, dict):
            eta_map = {i: float(self.eta) for i in self.weak_ids}
        else:
            eta_map = dict(self.eta)
        self.eta = {i: eta_map.get(i, 1.0) for i in self.weak_ids}
        for i, e in self.eta.items():
            if np.any(np.asarray(e, dtype=float) < 0):
                raise ConfigurationError(f"eta for sensor {i} must be >= 0")

        self.x0_mean = (np.zeros(n) if self.x0_mean is None
                        else np.asarray(self.x0_mean, dtype=float).reshape(-1))
        if self.x0_mean.shape != (n,):
            raise ConfigurationError(
                f"x0_mean must have length {n}, got {self.x0_mean.shape}")
        self.x0_cov = (np.eye(n) if self.x0_cov is None
                       else load_covariance(self.x0_cov, "x0_cov"))
        if self.x0_cov.shape != (n, n):
            raise ConfigurationError(
                f"x0_cov must be {n}x{n}, got {self.x0_cov.shape}")
        self.x0_factor = psd_factor(self.x0_cov, "x0_cov")

        self.enhanced = {
            i: build_enhanced_sensor(self.by_id[i],
                                     [self.by_id[j]
                                      for j in self.strong_map[i]])
            for i in self.weak_ids
        }
        self.time_invariant = (self.system.A.is_constant and
                               all(e.C.is_constant
                                   for e in self.enhanced.values()))
        self._aug_cache = {}

        shared = self._shared_strong_sensors()
        if shared:
            logger.info(
                "strong sensors %s are shared between weak sensors; the "
                "cross-covariance recursions assume uncorrelated enhanced "
                "measurement noises, so the fusion weights are approximate",
                sorted(shared))

    def _shared_strong_sensors(self):
        shared = set()
        weak = self.weak_ids
        for a in range(len(weak)):
            for b in range(a + 1, len(weak)):
                shared |= (set(self.strong_map[weak[a]])
                           & set(self.strong_map[weak[b]]))
        return shared

    @property
    def r(self):
        return len(self.weak_ids)

    @property
    def n(self):
        return self.system.n

    def aug(self, i, k):
        """Augmented subsystem of weak sensor i at step k (cached when
        time-invariant)."""
        if self.time_invariant:
            if i not in self._aug_cache:
                self._aug_cache[i] = build_augmented_subsystem(
                    self.system, self.enhanced[i], 0)
            return self._aug_cache[i]
        return build_augmented_subsystem(self.system, self.enhanced[i], k)

    def effective_values(self):
        """Flat summary of the resolved configuration, for echoing."""
        return {
            "name": self.name,
            "n": self.n,
            "sensors": [f"{s.id}:{s.defense}" for s in self.sensors],
            "weak": self.weak_ids,
            "strong_map": {i: list(v) for i, v in self.strong_map.items()},
            "attacks": {i: self.attacks[i].kind for i in self.weak_ids},
            "eta": [self.eta[i] for i in self.weak_ids],
            "horizon": self.horizon,
            "runs": self.runs,
            "seed": self.seed,
            "q_theta": self.q_theta,
            "x0_mean": self.x0_mean.tolist(),
        }


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

def builtin_ieee4bus():
    """Four-state power-grid monitoring scenario with five sensors.

    Sensors 1 and 2 are weak; sensor 1 is backed by strong sensors {3, 4}
    and carries Gaussian white attack noise with covariance 5, sensor 2 is
    backed by {3, 5} and carries a single-step pulse of 3 at k = 50.
    """
    A = [[-0.837, 0.5427, 0.0, 0.0],
         [-0.5427, -0.837, 0.0, 0.0],
         [0.0, 0.0, 0.9851, 0.0],
         [0.0, 0.0, 0.0, 0.9556]]
    Q = np.diag([0.1, 0.2, 0.3, 0.2])
    rows = {1: [1, 0, 0, 0], 2: [0, 0, 1, 0], 3: [1, 0, 0, 1],
            4: [0, 0, 1, 1], 5: [0, 1, 1, 0]}
    sensors = [SensorSpec(id=i, C_o=[rows[i]], R_o=[[0.1]],
                          defense="weak" if i in (1, 2) else "strong")
               for i in range(1, 6)]
    return ScenarioConfig(
        system=SystemModel(A=A, Q=Q),
        sensors=sensors,
        strong_map={1: (3, 4), 2: (3, 5)},
        attacks={1: AttackSpec(sensor_id=1, kind="gaussian", cov=[[5.0]]),
                 2: AttackSpec(sensor_id=2, kind="pulse",
                               start=50, end=50, value=[3.0])},
        eta={1: 1.0, 2: 1.0},
        horizon=100, runs=500, seed=1, q_theta=1.0,
        name="ieee4bus")


def builtin_scalar():
    """Scalar process with one weak and one strong sensor.

    Small enough to evaluate the first estimator step by hand; the attack is
    Gaussian with covariance matching eta so the covariance recursion is
    statistically consistent.
    """
    sensors = [SensorSpec(id=1, C_o=[[1.0]], R_o=[[1.0]], defense="weak"),
               SensorSpec(id=2, C_o=[[1.0]], R_o=[[1.0]], defense="strong")]
    return ScenarioConfig(
        system=SystemModel(A=[[1.0]], Q=[[1.0]]),
        sensors=sensors,
        strong_map={1: (2,)},
        attacks={1: AttackSpec(sensor_id=1, kind="gaussian", cov=[[1.0]])},
        eta={1: 1.0},
        horizon=100, runs=2000, seed=1, q_theta=1.0,
        name="scalar")


def builtin_scalar_consistency():
    """The scalar scenario with initial moments matched to the truth.

    The truth starts at x(0) ~ N(0, 1) with a zero attack at k = 0, so the
    matching initial conditions are P_X(0) = diag(1, 0) and P_phi(0) = 0.
    """
    cfg = builtin_scalar()
    init = LocalInit(P_X0=np.diag([1.0, 0.0]), P_phi0=[[0.0]],
                     U0=np.zeros((2, 1)), V0=[[0.0]])
    return replace(cfg, local_init={1: init}, name="scalar-consistency")


def builtin_scalar_pair():
    """Two weak scalar sensors with no strong support.

    Not observable as an estimation problem; used to exercise the pairwise
    covariance recursions in the smallest possible setting.
    """
    sensors = [SensorSpec(id=1, C_o=[[1.0]], R_o=[[1.0]], defense="weak"),
               SensorSpec(id=2, C_o=[[1.0]], R_o=[[1.0]], defense="weak")]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ScenarioConfig(
            system=SystemModel(A=[[1.0]], Q=[[1.0]]),
            sensors=sensors,
            strong_map={1: (), 2: ()},
            eta={1: 1.0, 2: 1.0},
            horizon=50, runs=100, seed=1, q_theta=1.0,
            name="scalar-pair")


BUILTIN_SCENARIOS = {
    "ieee4bus": builtin_ieee4bus,
    "scalar": builtin_scalar,
    "scalar-consistency": builtin_scalar_consistency,
    "scalar-pair": builtin_scalar_pair,
}


# ---------------------------------------------------------------------------
# Gain / weight schedule
# ---------------------------------------------------------------------------

@dataclass
class StepLocal:
    """Per-step, per-sensor schedule entry."""

    xi: local_estimator.XiTriple
    gains: local_estimator.GainPair
    P_X: np.ndarray
    P_phi: np.ndarray


@dataclass
class Schedule:
    """Measurement-independent gains and weights for steps 1..K.

    steps[k-1][i] holds sensor i's quantities at step k; weights[k] holds
    the fusion weights (weights[0] comes from the initial covariances).
    """

    horizon: int
    weak_ids: list
    steps: list
    weights: list
    akf_gains: dict
    q_theta: float
    px_trace: dict
    p0_trace: np.ndarray


def compute_schedule(cfg, horizon=None, q_theta=None):
    """Run the covariance/gain/weight recursion for a configuration."""
    K = cfg.horizon if horizon is None else int(horizon)
    q_theta = cfg.q_theta if q_theta is None else float(q_theta)
    n = cfg.n
    weak = cfg.weak_ids

    states = {}
    akf_P = {}
    for i in weak:
        aug0 = cfg.aug(i, 0)
        init = cfg.local_init.get(i)
        states[i] = local_estimator.init_local(
            aug0, init=init, eta=cfg.eta[i], weak_id=i)
        akf_P[i] = states[i].P_X.copy()

    cross = {}
    for a in range(len(weak)):
        for b in range(a + 1, len(weak)):
            i, j = weak[a], weak[b]
            p_i, p_j = cfg.by_id[i].p, cfg.by_id[j].p
            cross[(i, j)] = cross_covariance.init_cross(
                (i, j), n, p_i, p_j, cfg.system.Q,
                init=cfg.cross_init.get((i, j)))
            cross[(j, i)] = cross_covariance.init_cross(
                (j, i), n, p_j, p_i, cfg.system.Q,
                init=cfg.cross_init.get((j, i)))

    def _weights(step):
        blocks = [[None] * len(weak) for _ in weak]
        for a, i in enumerate(weak):
            for b, j in enumerate(weak):
                src = states[i].P_X if i == j else cross[(i, j)].P_X
                blocks[a][b] = fusion.state_block(src, n)
        try:
            return fusion.compute_weights(fusion.assemble_sigma(blocks),
                                          r=len(weak))
        except FusionError as exc:
            raise FusionError(f"step {step}: {exc}") from None

    w0 = _weights(0)
    weights = [w0]
    steps = []
    akf_gains = {i: [] for i in weak}
    px_trace = {i: [float(np.trace(states[i].P_X))] for i in weak}
    p0_trace = [float(np.trace(w0.P0))]

    for k in range(1, K + 1):
        augs = {i: cfg.aug(i, k) for i in weak}
        gains = {}
        xis = {}
        for i in weak:
            xis[i] = local_estimator.compute_xi(states[i], augs[i])
            gains[i] = local_estimator.compute_gains(states[i], xis[i],
                                                     augs[i])
        for i in weak:
            local_estimator.propagate_covariances(states[i], gains[i],
                                                  xis[i], augs[i])
        for a in range(len(weak)):
            for b in range(a + 1, len(weak)):
                i, j = weak[a], weak[b]
                cross_covariance.propagate_cross(
                    cross[(i, j)], cross[(j, i)], gains[i], gains[j],
                    augs[i], augs[j])
        weights.append(_weights(k))
        for i in weak:
            K_f, akf_P[i] = baseline.akf_gain(akf_P[i], augs[i], q_theta)
            akf_gains[i].append(K_f)
        steps.append({i: StepLocal(xi=xis[i], gains=gains[i],
                                   P_X=states[i].P_X.copy(),
                                   P_phi=states[i].P_phi.copy())
                      for i in weak})
        for i in weak:
            px_trace[i].append(float(np.trace(states[i].P_X)))
        p0_trace.append(float(np.trace(weights[-1].P0)))

    return Schedule(horizon=K, weak_ids=list(weak), steps=steps,
                    weights=weights, akf_gains=akf_gains, q_theta=q_theta,
                    px_trace={i: np.asarray(v) for i, v in px_trace.items()},
                    p0_trace=np.asarray(p0_trace))


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------

def run_rng(base_seed, run_index):
    """Independent generator for one Monte Carlo run."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(base_seed),
                               spawn_key=(int(run_index),)))


@dataclass
class RunRecord:
    """Per-step series of one simulated run, all of length horizon + 1."""

    seed: int
    run_index: int
    x: np.ndarray
    theta: dict
    x_hat: dict
    theta_hat: dict
    x0_hat: np.ndarray
    akf_x_hat: dict
    px_trace: dict


def _draw_noises(cfg, rng, K):
    """Draw every random input of one run in a fixed, documented order.

    Order: initial state, attack traces (weak id order), process noise
    block, then measurement noise blocks (sensor id order). Keeping the
    order fixed is what makes runs reproducible.
    """
    x0 = cfg.x0_mean + cfg.x0_factor @ rng.standard_normal(cfg.n)
    theta = {i: attack_trace(cfg.attacks[i], K, rng) for i in cfg.weak_ids}
    w = rng.standard_normal((K, cfg.n)) @ cfg.system.Q_factor.T
    v = {s.id: rng.standard_normal((K, s.p)) @ s.R_factor.T
         for s in sorted(cfg.sensors, key=lambda s: s.id)}
    return x0, theta, w, v


def simulate_run(cfg, schedule, rng, run_index=0, seed=None):
    """Simulate one run against a precomputed schedule."""
    K = schedule.horizon
    n = cfg.n
    weak = cfg.weak_ids
    x0, theta, w, v = _draw_noises(cfg, rng, K)

    x = np.zeros((K + 1, n))
    x[0] = x0
    x_hat = {i: np.zeros((K + 1, n)) for i in weak}
    theta_hat = {i: np.zeros((K + 1, cfg.by_id[i].p)) for i in weak}
    x0_hat = np.zeros((K + 1, n))
    akf_x_hat = {i: np.zeros((K + 1, n)) for i in weak}

    X_hat = {}
    phi_hat = {}
    akf_X = {}
    for i in weak:
        init = cfg.local_init.get(i) or LocalInit()
        d = n + cfg.by_id[i].p
        X_hat[i] = (np.zeros(d) if init.X_hat0 is None
                    else np.asarray(init.X_hat0, dtype=float).copy())
        phi_hat[i] = (np.zeros(cfg.by_id[i].p) if init.phi_hat0 is None
                      else np.asarray(init.phi_hat0, dtype=float).copy())
        akf_X[i] = X_hat[i].copy()
        x_hat[i][0] = X_hat[i][:n]
        theta_hat[i][0] = X_hat[i][n:]
        akf_x_hat[i][0] = akf_X[i][:n]

    x0_hat[0] = fusion.fuse_states(
        schedule.weights[0], [x_hat[i][0] for i in weak]).x0_hat

    for k in range(1, K + 1):
        xk = cfg.system.A_at(k) @ x[k - 1] + w[k - 1]
        x[k] = xk
        raw = {s.id: s.C_o.at(k) @ xk + v[s.id][k - 1]
               for s in cfg.sensors}
        for i in weak:
            aug = cfg.aug(i, k)
            y = assemble_measurement(inject_attack(raw[i], theta[i][k]),
                                     [raw[j] for j in cfg.strong_map[i]])
            step = schedule.steps[k - 1][i]
            pred = aug.A_a @ X_hat[i] + aug.Phi_a @ phi_hat[i]
            y_tilde = y - aug.C_a @ pred
            X_hat[i] = pred + step.gains.K @ y_tilde
            phi_hat[i] = phi_hat[i] + step.gains.Gamma @ y_tilde
            x_hat[i][k] = X_hat[i][:n]
            theta_hat[i][k] = X_hat[i][n:]

            pred_f = aug.A_a @ akf_X[i]
            akf_X[i] = pred_f + schedule.akf_gains[i][k - 1] @ (
                y - aug.C_a @ pred_f)
            akf_x_hat[i][k] = akf_X[i][:n]

        x0_hat[k] = fusion.fuse_states(
            schedule.weights[k], [x_hat[i][k] for i in weak]).x0_hat

    return RunRecord(seed=seed, run_index=run_index, x=x, theta=theta,
                     x_hat=x_hat, theta_hat=theta_hat, x0_hat=x0_hat,
                     akf_x_hat=akf_x_hat, px_trace=schedule.px_trace)


def run_scenario(cfg, seed=None, run_index=0, schedule=None):
    """Simulate one run; `seed` is the base seed, run 0 by default."""
    seed = cfg.seed if seed is None else int(seed)
    if schedule is None:
        schedule = compute_schedule(cfg)
    rng = run_rng(seed, run_index)
    return simulate_run(cfg, schedule, rng, run_index=run_index, seed=seed)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class MseReport:
    """Per-step mean squared errors over a batch of runs."""

    k: np.ndarray
    mse_fused: np.ndarray
    mse_local: dict
    mse_theta: dict
    mse_akf: dict
    mse_fused_components: np.ndarray
    runs: int
    completed: int
    seed: int
    q_theta: float
    partial: bool
    failures: list


def _run_curves(cfg, schedule, base_seed, idx):
    rec = simulate_run(cfg, schedule, run_rng(base_seed, idx),
                       run_index=idx, seed=base_seed)
    err_f = rec.x - rec.x0_hat
    curves = {
        "fused": np.einsum("ij,ij->i", err_f, err_f),
        "fused_components": err_f ** 2,
    }
    for i in cfg.weak_ids:
        e = rec.x - rec.x_hat[i]
        curves[f"local_{i}"] = np.einsum("ij,ij->i", e, e)
        e = rec.theta[i] - rec.theta_hat[i]
        curves[f"theta_{i}"] = np.einsum("ij,ij->i", e, e)
        e = rec.x - rec.akf_x_hat[i]
        curves[f"akf_{i}"] = np.einsum("ij,ij->i", e, e)
    return curves


def _mc_chunk(payload):
    cfg, schedule, base_seed, indices = payload
    out = []
    for idx in indices:
        try:
            out.append((idx, _run_curves(cfg, schedule, base_seed, idx), None))
        except SecFusionError as exc:
            out.append((idx, None, str(exc)))
    return out


def run_monte_carlo(cfg, runs=None, seed=None, workers=1, q_theta=None):
    """Average squared-error curves over independent runs.

    Results are bit-identical for a given (cfg, seed) regardless of the
    worker count: runs use index-derived generators and are reduced in index
    order.
    """
    runs = cfg.runs if runs is None else int(runs)
    seed = cfg.seed if seed is None else int(seed)
    if runs < 1:
        raise ConfigurationError("runs must be >= 1")
    schedule = compute_schedule(cfg, q_theta=q_theta)

    indices = list(range(runs))
    if workers > 1:
        chunks = [indices[c::workers] for c in range(workers)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                _mc_chunk,
                [(cfg, schedule, seed, chunk) for chunk in chunks]))
        results = {idx: (curves, err)
                   for part in parts for idx, curves, err in part}
    else:
        results = {idx: (curves, err)
                   for idx, curves, err in _mc_chunk((cfg, schedule, seed,
                                                      indices))}

    sums = None
    failures = []
    completed = 0
    for idx in indices:
        curves, err = results[idx]
        if err is not None:
            failures.append((idx, err))
            continue
        completed += 1
        if sums is None:
            sums = {key: val.copy() for key, val in curves.items()}
        else:
            for key, val in curves.items():
                sums[key] += val
    if completed == 0:
        raise SecFusionError(
            f"all {runs} runs failed; first failure: {failures[0][1]}")
    for fail in failures:
        logger.warning("run %d (seed %d) failed: %s", fail[0], seed, fail[1])

    k_axis = np.arange(schedule.horizon + 1)
    return MseReport(
        k=k_axis,
        mse_fused=sums["fused"] / completed,
        mse_local={i: sums[f"local_{i}"] / completed for i in cfg.weak_ids},
        mse_theta={i: sums[f"theta_{i}"] / completed for i in cfg.weak_ids},
        mse_akf={i: sums[f"akf_{i}"] / completed for i in cfg.weak_ids},
        mse_fused_components=sums["fused_components"] / completed,
        runs=runs, completed=completed, seed=seed,
        q_theta=schedule.q_theta, partial=bool(failures), failures=failures)


def time_averaged(curve, k_lo, k_hi):
    """Mean of a per-step curve over the inclusive window [k_lo, k_hi]."""
    return float(np.mean(np.asarray(curve)[k_lo:k_hi + 1]))


# ---------------------------------------------------------------------------
# Observability check
# ---------------------------------------------------------------------------

def observability_reports(cfg, horizon=None):
    """Observability report of each weak sensor's augmented subsystem."""
    return [check_observability(cfg.aug(i, 0), horizon=horizon, weak_id=i)
            for i in cfg.weak_ids]


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------

@dataclass
class OptimalityRecord:
    step: int
    weak_id: int
    gain: str
    trials: int
    min_margin: float


@dataclass
class OptimalityReport:
    records: list
    tolerance: float

    @property
    def min_margin(self):
        return min(r.min_margin for r in self.records)

    @property
    def passed(self):
        return self.min_margin >= -self.tolerance


def gain_optimality_probe(cfg, steps=(1,), trials=100, seed=0,
                          tolerance=1e-9):
    """Check that perturbing either gain increases the traced covariance.

    For each requested step and weak sensor, `trials` random nonzero
    perturbations are added to the optimal state gain and input gain, and
    the corresponding error covariance traces are re-evaluated directly.
    Every margin (perturbed minus optimal) must clear -tolerance.
    """
    if isinstance(steps, int):
        steps = (steps,)
    steps = sorted(set(int(s) for s in steps))
    if steps[0] < 1:
        raise ConfigurationError("probe steps must be >= 1")
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    schedule = compute_schedule(cfg, horizon=steps[-1])
    rng = np.random.default_rng(seed)

    records = []
    for k in steps:
        for i in cfg.weak_ids:
            step = schedule.steps[k - 1][i]
            aug = cfg.aug(i, k)
            base_x = np.trace(local_estimator.px_given_gain(
                step.gains.K, step.xi, aug))
            base_phi = np.trace(local_estimator.pphi_given_gain(
                step.gains.Gamma, step.xi, aug))
            margins_x = []
            margins_phi = []
            for _ in range(trials):
                A_r = rng.standard_normal(step.gains.K.shape)
                margins_x.append(np.trace(local_estimator.px_given_gain(
                    step.gains.K + A_r, step.xi, aug)) - base_x)
                B_r = rng.standard_normal(step.gains.Gamma.shape)
                margins_phi.append(np.trace(local_estimator.pphi_given_gain(
                    step.gains.Gamma + B_r, step.xi, aug)) - base_phi)
            records.append(OptimalityRecord(
                step=k, weak_id=i, gain="K", trials=trials,
                min_margin=float(min(margins_x))))
            records.append(OptimalityRecord(
                step=k, weak_id=i, gain="Gamma", trials=trials,
                min_margin=float(min(margins_phi))))
    return OptimalityReport(records=records, tolerance=tolerance)


@dataclass
class ConsistencyRecord:
    weak_id: int
    checkpoint: int
    rel_frobenius: float
    rel_trace: float


@dataclass
class ConsistencyReport:
    records: list
    runs: int
    tolerance: float

    @property
    def worst(self):
        return max(r.rel_frobenius for r in self.records)

    @property
    def passed(self):
        return self.worst <= self.tolerance


def covariance_consistency_probe(cfg, runs=None, checkpoints=(20,),
                                 seed=None, tolerance=0.15):
    """Compare predicted error covariances against the empirical ones.

    Requires attacks that make the covariance recursion statistically exact:
    independent Gaussian attacks with covariance eta * I per weak sensor,
    and disjoint strong assignments so the enhanced measurement noises are
    uncorrelated across weak sensors.
    """
    runs = cfg.runs if runs is None else int(runs)
    seed = cfg.seed if seed is None else int(seed)
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if checkpoints[0] < 1:
        raise ConfigurationError("checkpoints must be >= 1")

    for i in cfg.weak_ids:
        spec = cfg.attacks[i]
        if spec.kind != "gaussian":
            raise ConfigurationError(
                f"consistency probe requires gaussian attacks; sensor {i} "
                f"has kind {spec.kind!r}")
        eta = cfg.eta[i]
        if np.ndim(eta) != 0:
            raise ConfigurationError(
                "consistency probe requires a constant eta per sensor")
        target = float(eta) * np.eye(spec.p)
        if not np.allclose(spec.cov, target, rtol=1e-9, atol=1e-12):
            raise ConfigurationError(
                f"sensor {i}: attack covariance must equal eta*I = "
                f"{float(eta)}*I for the probe to be meaningful")
    shared = cfg._shared_strong_sensors()
    if shared:
        raise ConfigurationError(
            f"consistency probe requires disjoint strong assignments; "
            f"shared sensors {sorted(shared)}")

    K = checkpoints[-1]
    schedule = compute_schedule(cfg, horizon=K)
    sums = {(i, c): 0.0 for i in cfg.weak_ids for c in checkpoints}
    for idx in range(runs):
        rec = simulate_run(cfg, schedule, run_rng(seed, idx), run_index=idx,
                           seed=seed)
        for i in cfg.weak_ids:
            for c in checkpoints:
                err = np.concatenate([rec.x[c] - rec.x_hat[i][c],
                                      rec.theta[i][c] - rec.theta_hat[i][c]])
                sums[(i, c)] = sums[(i, c)] + np.outer(err, err)

    tiny = 1e-300
    records = []
    for i in cfg.weak_ids:
        for c in checkpoints:
            emp = sums[(i, c)] / runs
            pred = schedule.steps[c - 1][i].P_X
            rel_f = (np.linalg.norm(emp - pred) /
                     max(np.linalg.norm(pred), tiny))
            rel_t = (abs(np.trace(emp) - np.trace(pred)) /
                     max(abs(np.trace(pred)), tiny))
            records.append(ConsistencyRecord(
                weak_id=i, checkpoint=c,
                rel_frobenius=float(rel_f), rel_trace=float(rel_t)))
    return ConsistencyReport(records=records, runs=runs, tolerance=tolerance)
