"""Core model definitions: parameters, population state, and the 14 stochastic transitions.

Single source of truth for the reaction network. The SSA and ODE modules
consume the same rate formulas and state-change vectors defined here.

Type indices (used for state vectors, transition deltas and type subsets):

    0: 1a  active resident host
    1: 1i  infected resident host
    2: 2a  active dormancy-capable host
    3: 2d  dormant host
    4: 2i  infected dormancy-capable host
    5: 3   free virion
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

TYPE_NAMES = ("1a", "1i", "2a", "2d", "2i", "3")
TYPE_INDEX = {name: i for i, name in enumerate(TYPE_NAMES)}

PARAM_KEYS = (
    "lambda1", "lambda2", "mu1", "C", "D", "q",
    "r", "v", "m", "sigma", "kappa", "mu3", "K",
)


class ConfigError(ValueError):
    """Raised for malformed or incomplete parameter configs."""


@dataclass(frozen=True)
class ModelParams:
    """All rate constants plus the carrying capacity K.

    Rates are per-capita (or per-pair divided by K where noted):
    lambda1/lambda2 birth rates of active hosts, mu1 natural death rate,
    C competition strength (per pair, scaled by 1/K), D virus-contact rate
    (per pair, scaled by 1/K), q dormancy-initiation probability, r recovery
    rate, v lysis rate, m burst size, sigma resuscitation rate, kappa dormant
    death-rate factor, mu3 virion degradation rate.

    K is a positive integer for stochastic runs; ODE-only analysis accepts
    any positive real.
    """

    lambda1: float
    lambda2: float
    mu1: float
    C: float
    D: float
    q: float
    r: float
    v: float
    m: int
    sigma: float
    kappa: float
    mu3: float
    K: float = 1.0

    def __post_init__(self):
        for key in ("lambda1", "lambda2", "mu1", "C", "D", "r", "v", "sigma", "kappa", "mu3"):
            val = getattr(self, key)
            if not math.isfinite(val) or val < 0:
                raise ConfigError(f"parameter {key} must be a finite nonnegative number, got {val!r}")
        if not 0.0 <= self.q <= 1.0:
            raise ConfigError(f"q must lie in [0, 1], got {self.q!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"burst size m must be an integer >= 1, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        if not self.K >= 1:
            raise ConfigError(f"carrying capacity K must be >= 1, got {self.K!r}")
        if not 0.0 < self.mu1 < self.lambda2:
            warnings.warn(
                f"fitness ordering 0 < mu1 < lambda2 violated (mu1={self.mu1}, lambda2={self.lambda2}); "
                "both host types are fit only under that ordering",
                stacklevel=2,
            )

    def with_updates(self, **kwargs) -> "ModelParams":
        d = self.to_dict()
        d.update(kwargs)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_KEYS}

    def rate_vector(self) -> np.ndarray:
        """Parameters packed for the numba kernels, order as PARAM_KEYS minus m."""
        return np.array(
            [self.lambda1, self.lambda2, self.mu1, self.C, self.D, self.q,
             self.r, self.v, self.sigma, self.kappa, self.mu3, float(self.K)],
            dtype=np.float64,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        unknown = set(data) - set(PARAM_KEYS)
        if unknown:
            raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")
        missing = [k for k in PARAM_KEYS if k not in data and k != "K"]
        if missing:
            raise ConfigError(f"missing required parameter keys: {missing}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ModelParams":
        return cls.from_dict(load_param_file(path))

    def to_file(self, path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".json":
            path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        else:
            lines = [f"{k} = {getattr(self, k)!r}" for k in PARAM_KEYS]
            path.write_text("\n".join(lines) + "\n")


def load_param_file(path) -> dict:
    """Read a flat key-value config (JSON or TOML, detected by extension).

    Accepts either a flat parameter mapping or a run manifest that carries
    the parameters under a "params" key.
    """
    path = Path(path)
    text = path.read_text()
    suffix = path.suffix.lower()
    if suffix in (".toml", ".tml"):
        import tomli

        data = tomli.loads(text)
    elif suffix == ".json":
        data = json.loads(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            import tomli

            data = tomli.loads(text)
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} does not contain a key-value table")
    if "params" in data and isinstance(data["params"], dict):
        data = data["params"]
    return data


@dataclass(frozen=True)
class PopulationState:
    """Absolute integer counts of the six types."""

    n1a: int
    n1i: int
    n2a: int
    n2d: int
    n2i: int
    n3: int

    def __post_init__(self):
        for name in ("n1a", "n1i", "n2a", "n2d", "n2i", "n3"):
            val = getattr(self, name)
            if int(val) != val or val < 0:
                raise ValueError(f"count {name} must be a nonnegative integer, got {val!r}")
            object.__setattr__(self, name, int(val))

    @property
    def n1(self) -> int:
        return self.n1a + self.n1i

    @property
    def n2(self) -> int:
        return self.n2a + self.n2d + self.n2i

    @property
    def total(self) -> int:
        return self.n1 + self.n2 + self.n3

    def as_array(self) -> np.ndarray:
        return np.array([self.n1a, self.n1i, self.n2a, self.n2d, self.n2i, self.n3], dtype=np.int64)

    def rescaled(self, K: float) -> np.ndarray:
        """Per-capacity view N/K as floats."""
        return self.as_array() / float(K)

    @classmethod
    def from_array(cls, arr) -> "PopulationState":
        a = [int(x) for x in arr]
        return cls(*a)

    @classmethod
    def zero(cls) -> "PopulationState":
        return cls(0, 0, 0, 0, 0, 0)


class TransitionKind(Enum):
    """The 14 transition channels, in canonical order."""

    BIRTH_1A = 0
    DEATH_1A = 1
    INFECTION_1A = 2
    RECOVERY_1I = 3
    LYSIS_1I = 4
    BIRTH_2A = 5
    DEATH_2A = 6
    INFECTION_2A = 7
    DORMANCY_2A = 8
    RECOVERY_2I = 9
    LYSIS_2I = 10
    RESUSCITATION_2D = 11
    DEATH_2D = 12
    DEGRADATION_3 = 13


def transition_deltas(m: int) -> np.ndarray:
    """State-change vectors for the 14 channels; lysis releases m virions.

    The dormancy channel leaves n3 unchanged: the virion is repelled, not
    absorbed.
    """
    return np.array(
        [
            [+1, 0, 0, 0, 0, 0],   # 1a birth
            [-1, 0, 0, 0, 0, 0],   # 1a death
            [-1, +1, 0, 0, 0, -1],  # 1a infection
            [+1, -1, 0, 0, 0, 0],   # 1i recovery
            [0, -1, 0, 0, 0, +m],   # 1i lysis
            [0, 0, +1, 0, 0, 0],    # 2a birth
            [0, 0, -1, 0, 0, 0],    # 2a death
            [0, 0, -1, 0, +1, -1],  # 2a infection
            [0, 0, -1, +1, 0, 0],   # 2a dormancy entry (virion repelled)
            [0, 0, +1, 0, -1, 0],   # 2i recovery
            [0, 0, 0, 0, -1, +m],   # 2i lysis
            [0, 0, +1, -1, 0, 0],   # 2d resuscitation
            [0, 0, 0, -1, 0, 0],    # 2d death
            [0, 0, 0, 0, 0, -1],    # virion degradation
        ],
        dtype=np.int64,
    )


@dataclass(frozen=True)
class Transition:
    kind: TransitionKind
    delta: tuple
    rate: float


def transition_rates(params: ModelParams, state: PopulationState) -> np.ndarray:
    """The 14 channel rates at the given state, in canonical order."""
    p = params
    n1 = state.n1
    n2 = state.n2
    comp = p.mu1 + (p.C / p.K) * (n1 + n2)
    contact = p.D / p.K
    return np.array(
        [
            p.lambda1 * state.n1a,
            comp * state.n1a,
            contact * state.n1a * state.n3,
            p.r * state.n1i,
            p.v * state.n1i,
            p.lambda2 * state.n2a,
            comp * state.n2a,
            (1.0 - p.q) * contact * state.n2a * state.n3,
            p.q * contact * state.n2a * state.n3,
            p.r * state.n2i,
            p.v * state.n2i,
            p.sigma * state.n2d,
            p.kappa * p.mu1 * state.n2d,
            p.mu3 * state.n3,
        ],
        dtype=np.float64,
    )


def enumerate_transitions(params: ModelParams, state: PopulationState) -> list:
    """All 14 transitions with their current rates (zero-count channels included)."""
    rates = transition_rates(params, state)
    deltas = transition_deltas(params.m)
    return [
        Transition(kind=kind, delta=tuple(int(d) for d in deltas[kind.value]), rate=float(rates[kind.value]))
        for kind in TransitionKind
    ]


def total_rate(params: ModelParams, state: PopulationState) -> float:
    """Sum of the 14 transition rates."""
    return float(transition_rates(params, state).sum())
