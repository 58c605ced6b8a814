"""Attack signal generation and tampered measurement assembly.

An attack is an additive signal theta_i(k) on one weak sensor's channel.
Supported kinds: gaussian white noise, a rectangular pulse, a constant
offset, a trace loaded from a text file (one whitespace-separated vector per
line, line index = step), and none. Every kind except file yields zero at
k = 0 so the estimator's zero initial attack estimate matches the truth.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError
from .linalg import psd_factor

KINDS = ("gaussian", "pulse", "constant", "file", "none")


@dataclass
class AttackSpec:
    """Description of the attack injected on one weak sensor."""

    sensor_id: int
    kind: str
    p: int = None
    cov: np.ndarray = None          # gaussian
    start: int = None               # pulse, active on start <= k <= end
    end: int = None
    value: np.ndarray = None        # pulse / constant
    path: str = None                # file
    cov_factor: np.ndarray = field(default=None, repr=False)
    trace: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(
                f"attack kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "gaussian":
            if self.cov is None:
                raise ConfigurationError("gaussian attack requires cov")
            self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            self.cov_factor = psd_factor(self.cov,
                                         f"attack cov[{self.sensor_id}]")
            self._set_p(self.cov.shape[0])
        elif self.kind in ("pulse", "constant"):
            if self.value is None:
                raise ConfigurationError(f"{self.kind} attack requires value")
            self.value = np.atleast_1d(np.asarray(self.value, dtype=float))
            self._set_p(self.value.shape[0])
            if self.kind == "pulse":
                if self.start is None or self.end is None:
                    raise ConfigurationError("pulse attack requires start and end")
                if self.start > self.end:
                    raise ConfigurationError(
                        f"pulse start {self.start} exceeds end {self.end}")
        elif self.kind == "file":
            if self.path is None:
                raise ConfigurationError("file attack requires path")
            self.trace = _load_trace(self.path)
            self._set_p(self.trace.shape[1])
        else:  # none
            if self.p is None:
                raise ConfigurationError("kind 'none' requires explicit p")

    def _set_p(self, p):
        if self.p is not None and self.p != p:
            raise ConfigurationError(
                f"attack on sensor {self.sensor_id}: declared p={self.p} "
                f"does not match data dimension {p}")
        self.p = p


def none_attack(sensor_id, p):
    return AttackSpec(sensor_id=sensor_id, kind="none", p=p)


def _load_trace(path):
    try:
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
    except OSError as exc:
        raise InputError(f"cannot read attack trace {path}: {exc}") from None
    if not lines:
        raise InputError(f"attack trace {path} is empty")
    width = len(lines[0])
    rows = []
    for idx, parts in enumerate(lines):
        if len(parts) != width:
            raise InputError(
                f"attack trace {path}: line {idx} has {len(parts)} values, "
                f"expected {width}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise InputError(
                f"attack trace {path}: line {idx} is not numeric") from None
    return np.asarray(rows, dtype=float)


def generate_attack(spec, k, rng=None):
    """The attack vector theta(k) for one step.

    Gaussian draws come from `rng` and are independent across steps. All
    kinds except file return zero at k = 0.
    """
    zero = np.zeros(spec.p)
    if spec.kind == "file":
        if k >= len(spec.trace):
            raise InputError(
                f"attack trace for sensor {spec.sensor_id} has "
                f"{len(spec.trace)} steps, step {k} requested")
        return spec.trace[k].copy()
    if k == 0 or spec.kind == "none":
        return zero
    if spec.kind == "gaussian":
        return spec.cov_factor @ rng.standard_normal(spec.p)
    if spec.kind == "pulse":
        return spec.value.copy() if spec.start <= k <= spec.end else zero
    return spec.value.copy()  # constant


def attack_trace(spec, horizon, rng=None):
    """Full attack series for steps 0..horizon as an array (horizon+1, p)."""
    return np.array([generate_attack(spec, k, rng)
                     for k in range(horizon + 1)])


def inject_attack(y_o, theta):
    """Tampered measurement y_o + theta."""
    y_o = np.asarray(y_o, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if y_o.shape != theta.shape:
        raise ValueError(
            f"measurement shape {y_o.shape} != attack shape {theta.shape}")
    return y_o + theta


def assemble_measurement(y_weak_attacked, y_strongs):
    """Stack the (possibly attacked) weak reading over its strong readings.

    The order of y_strongs must match the enhanced sensor's strong_ids.
    """
    parts = [np.atleast_1d(np.asarray(y_weak_attacked, dtype=float))]
    parts.extend(np.atleast_1d(np.asarray(y, dtype=float))
                 for y in y_strongs)
    return np.concatenate(parts)
