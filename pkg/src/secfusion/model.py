"""Process and sensor models, enhanced measurements, and augmented subsystems.

A linear process x(k) = A(k) x(k-1) + w(k-1) is observed by L sensors
y_i(k) = C_i x(k) + v_i(k). Sensors are labeled weak (their channel may be
tampered with additively) or strong (guaranteed clean). Each weak sensor is
stacked with a set of strong sensors into an enhanced measurement, and the
attack signal is appended to the state vector, giving one augmented
subsystem per weak sensor on which the joint estimator runs.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError
from .linalg import load_covariance, psd_factor


class StepMatrix:
    """A matrix that may vary per time step.

    Wraps either a constant 2-D array (broadcast to every step) or a 3-D
    sequence of per-step matrices indexed by k.
    """

    def __init__(self, data, name="matrix"):
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 2:
            self._constant = arr
            self._sequence = None
        elif arr.ndim == 3:
            self._constant = None
            self._sequence = arr
        else:
            raise ConfigurationError(
                f"{name} must be 2-D (constant) or 3-D (per step), "
                f"got ndim={arr.ndim}")
        self.name = name

    @property
    def is_constant(self):
        return self._sequence is None

    @property
    def steps(self):
        return None if self.is_constant else len(self._sequence)

    @property
    def shape(self):
        if self.is_constant:
            return self._constant.shape
        return self._sequence.shape[1:]

    def at(self, k):
        if self.is_constant:
            return self._constant
        if not 0 <= k < len(self._sequence):
            raise ConfigurationError(
                f"{self.name} defines steps 0..{len(self._sequence) - 1}, "
                f"step {k} requested")
        return self._sequence[k]


def _as_step_matrix(data, name):
    return data if isinstance(data, StepMatrix) else StepMatrix(data, name)


@dataclass
class SystemModel:
    """The monitored physical process: transition matrix and process noise."""

    A: StepMatrix
    Q: np.ndarray

    def __post_init__(self):
        self.A = _as_step_matrix(self.A, "A")
        self.Q = load_covariance(self.Q, "Q")
        self.n = self.Q.shape[0]
        if self.A.shape != (self.n, self.n):
            raise ConfigurationError(
                f"A must be {self.n}x{self.n} to match Q, got {self.A.shape}")
        self.Q_factor = psd_factor(self.Q, "Q")

    def A_at(self, k):
        return self.A.at(k)


@dataclass
class SensorSpec:
    """One raw sensor: measurement matrix, noise covariance, defense label."""

    id: int
    C_o: StepMatrix
    R_o: np.ndarray
    defense: str

    def __post_init__(self):
        if self.defense not in ("weak", "strong"):
            raise ConfigurationError(
                f"sensor {self.id}: defense must be 'weak' or 'strong', "
                f"got {self.defense!r}")
        self.id = int(self.id)
        self.C_o = _as_step_matrix(np.atleast_2d(self.C_o)
                                   if not isinstance(self.C_o, StepMatrix)
                                   else self.C_o, f"C_o[{self.id}]")
        self.R_o = load_covariance(self.R_o, f"R_o[{self.id}]")
        self.p = self.C_o.shape[0]
        if self.R_o.shape[0] != self.p:
            raise ConfigurationError(
                f"sensor {self.id}: R_o is {self.R_o.shape[0]}x"
                f"{self.R_o.shape[1]} but C_o has {self.p} rows")
        # Zero rows are accepted so noiseless sensors can be configured;
        # positive definiteness only matters where an innovation covariance
        # is inverted, and that solve checks itself.
        self.R_factor = psd_factor(self.R_o, f"R_o[{self.id}]")

    @property
    def n(self):
        return self.C_o.shape[1]


@dataclass
class EnhancedSensor:
    """A weak sensor stacked with its assigned strong sensors.

    C is the stacked measurement matrix, Phi routes the attack onto the weak
    rows only, and R is the block-diagonal stacked noise covariance.
    """

    weak_id: int
    strong_ids: tuple
    C: StepMatrix
    Phi: np.ndarray
    R: np.ndarray
    n: int
    p: int
    m: int
    R_factor: np.ndarray


def build_enhanced_sensor(weak, strongs):
    """Stack a weak sensor with strong sensors into an enhanced measurement.

    The stacking order is [weak; strongs...] in the order given. An empty
    strong list is permitted but warned about: without clean rows the attack
    is not separable from the state in general.
    """
    if weak.defense != "weak":
        raise ConfigurationError(f"sensor {weak.id} is not weak-defense")
    for s in strongs:
        if s.defense != "strong":
            raise ConfigurationError(
                f"sensor {s.id} assigned as strong support is not "
                "strong-defense")
    n = weak.n
    for s in strongs:
        if s.n != n:
            raise ConfigurationError(
                f"sensor {s.id} has {s.n} state columns, expected {n}")
    if not strongs:
        warnings.warn(
            f"weak sensor {weak.id} has no strong sensors assigned; the "
            "enhanced measurement degenerates to the attacked channel alone",
            stacklevel=2)

    specs = [weak] + list(strongs)
    p = weak.p
    m = sum(s.p for s in specs)

    if all(s.C_o.is_constant for s in specs):
        C = StepMatrix(np.vstack([s.C_o.at(0) for s in specs]),
                       f"C[{weak.id}]")
    else:
        steps = max(s.C_o.steps for s in specs if not s.C_o.is_constant)
        C = StepMatrix(
            np.stack([np.vstack([s.C_o.at(k) for s in specs])
                      for k in range(steps)]),
            f"C[{weak.id}]")

    Phi = np.zeros((m, p))
    Phi[:p, :p] = np.eye(p)
    R = scipy.linalg.block_diag(*[s.R_o for s in specs])
    R_factor = scipy.linalg.block_diag(*[s.R_factor for s in specs])
    return EnhancedSensor(weak_id=weak.id,
                          strong_ids=tuple(s.id for s in strongs),
                          C=C, Phi=Phi, R=R, n=n, p=p, m=m,
                          R_factor=R_factor)


@dataclass
class AugmentedSubsystem:
    """Per-step snapshot of one weak sensor's augmented dynamics.

    The augmented state is [x; theta]; the attack increment enters as an
    unknown input through Phi_a, and the attack channel itself carries no
    process noise (zero block in Q_a).
    """

    n: int
    p: int
    m: int
    k: int
    A_a: np.ndarray
    Phi_a: np.ndarray
    C_a: np.ndarray
    Q_a: np.ndarray
    R: np.ndarray

    @property
    def n_aug(self):
        return self.n + self.p


def build_augmented_subsystem(sys, enh, k=0):
    """Materialize the augmented subsystem for one enhanced sensor at step k."""
    if enh.n != sys.n:
        raise ConfigurationError(
            f"enhanced sensor {enh.weak_id} expects state dimension {enh.n}, "
            f"system has {sys.n}")
    if enh.p < 1:
        raise ConfigurationError(
            f"weak sensor {enh.weak_id} must have at least one measurement "
            "row to carry an attack channel")
    n, p = sys.n, enh.p
    A_a = scipy.linalg.block_diag(sys.A_at(k), np.eye(p))
    Phi_a = np.vstack([np.zeros((n, p)), np.eye(p)])
    C_a = np.hstack([enh.C.at(k), enh.Phi])
    Q_a = scipy.linalg.block_diag(sys.Q, np.zeros((p, p)))
    return AugmentedSubsystem(n=n, p=p, m=enh.m, k=k, A_a=A_a, Phi_a=Phi_a,
                              C_a=C_a, Q_a=Q_a, R=enh.R)


def cross_process_noise(sys, p_i, p_j):
    """Cross process-noise block [[Q, O], [O, O]] of shape (n+p_i, n+p_j)."""
    if p_i < 1 or p_j < 1:
        raise ConfigurationError("attack dimensions must be >= 1")
    n = sys.n
    out = np.zeros((n + p_i, n + p_j))
    out[:n, :n] = sys.Q
    return out


def step_truth(sys, x_prev, rng, k=0):
    """Advance the true state one step: A(k) x_prev + w, w ~ N(0, Q)."""
    x_prev = np.asarray(x_prev, dtype=float)
    if x_prev.shape != (sys.n,):
        raise ConfigurationError(
            f"state must have length {sys.n}, got shape {x_prev.shape}")
    w = sys.Q_factor @ rng.standard_normal(sys.n)
    return sys.A_at(k) @ x_prev + w


def measure(spec, x, rng, k=0):
    """Raw sensor reading C_o x + v, v ~ N(0, R_o)."""
    x = np.asarray(x, dtype=float)
    v = spec.R_factor @ rng.standard_normal(spec.p)
    return spec.C_o.at(k) @ x + v


@dataclass
class ObservabilityReport:
    """Numerical rank of the stacked observability matrix over a window."""

    weak_id: int
    dim: int
    horizon: int
    rank: int
    full_rank: bool


def check_observability(aug, horizon=None, weak_id=None):
    """Rank of [C_a; C_a A_a; ...; C_a A_a^(horizon-1)] for one snapshot.

    Rank deficiency is reported, not raised: a deficient window may still be
    acceptable for short runs or specific initializations.
    """
    dim = aug.n_aug
    if horizon is None:
        horizon = dim
    if horizon < 1:
        raise ConfigurationError("observability horizon must be >= 1")
    rows = []
    block = aug.C_a.copy()
    for _ in range(horizon):
        rows.append(block)
        block = block @ aug.A_a
    obs = np.vstack(rows)
    rank = int(np.linalg.matrix_rank(obs))
    return ObservabilityReport(weak_id=weak_id, dim=dim, horizon=horizon,
                               rank=rank, full_rank=rank == dim)
