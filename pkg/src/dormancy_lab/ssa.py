"""Exact stochastic simulation (Gillespie direct method) of the six-type
chain, instrumented with the stopping times used by the invasion experiments:

  T_beta            first time every type exceeds beta*K
  T_0^A             extinction time of a type subset A
  T_eps^A           first time the A-total equals floor(eps*K)
  T_{n,delta}       entry into a delta-neighborhood of an equilibrium,
                    optionally requiring a type subset to be exactly extinct
  R_band            first exit of selected coordinates from a band around a
                    reference point (the resident-stays-put time)

Stopping predicates are evaluated after every jump, so hit times are exact to
the event. Identical (seed, params, initial, config, stops) give bit-identical
event sequences.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .model import TYPE_INDEX, ModelParams, PopulationState

DEFAULT_T_MAX = 1e3
DEFAULT_EVENT_CAP = 10 ** 9
DEFAULT_BETA = 0.05
DEFAULT_DELTA = 0.1
DEFAULT_EPS = 0.02


@dataclass(frozen=True)
class SsaConfig:
    seed: int = 1729
    t_max: float = DEFAULT_T_MAX
    event_cap: int = DEFAULT_EVENT_CAP
    record_stride: float = 0.0     # <= 0 disables trajectory recording

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.event_cap >= 1:
            raise ValueError("event_cap must be >= 1")


def _subset_mask(names) -> int:
    mask = 0
    for name in names:
        mask |= 1 << TYPE_INDEX[name]
    return mask


@dataclass
class NeighborhoodTarget:
    center: np.ndarray             # rescaled six-type point
    delta: float = DEFAULT_DELTA
    require_extinct: tuple = ()    # type names that must be exactly 0
    halt: bool = True
    label: str = ""


@dataclass
class StoppingSpec:
    """Requested stopping times. Subsets are given as type names among
    ('1a','1i','2a','2d','2i','3'); thresholds in rescaled units."""

    beta: Optional[float] = None
    halt_on_beta: bool = False
    extinction_sets: list = field(default_factory=list)      # [(names...), ...]
    halt_on_extinction: list = field(default_factory=list)   # parallel bools (default True)
    epsilon_targets: list = field(default_factory=list)      # [((names...), eps), ...]
    halt_on_epsilon: list = field(default_factory=list)
    neighborhood_targets: list = field(default_factory=list)  # [NeighborhoodTarget, ...]
    resident_band: Optional[tuple] = None   # ((names...), center 6-vector, halfwidth)
    halt_on_band: bool = False

    def labels(self) -> list:
        out = ["T_beta"]
        out += ["T_0^{%s}" % ",".join(s) for s in self.extinction_sets]
        out += ["T_eps^{%s}[%g]" % (",".join(s), e) for s, e in self.epsilon_targets]
        out += [t.label or f"T_nbhd[{i}]" for i, t in enumerate(self.neighborhood_targets)]
        out.append("R_band")
        return out


@dataclass
class SsaOutcome:
    trajectory_times: np.ndarray
    trajectory_states: np.ndarray          # absolute integer counts
    hits: dict                             # label -> hit time or None
    final_state: PopulationState
    t_final: float
    events_used: int
    termination_reason: str                # t_max | event_cap | absorbing | first-stop-hit

    def rescaled_trajectory(self, K: float) -> np.ndarray:
        return self.trajectory_states / float(K)


_REASONS = {
    _kernels.REASON_ABSORBING: "absorbing",
    _kernels.REASON_T_MAX: "t_max",
    _kernels.REASON_EVENT_CAP: "event_cap",
    _kernels.REASON_STOP_HIT: "first-stop-hit",
}


def _pack_stops(params: ModelParams, stops: StoppingSpec):
    K = float(params.K)
    beta_level = (stops.beta * K) if stops.beta else -1.0

    ext_masks = np.array([_subset_mask(s) for s in stops.extinction_sets], dtype=np.int64)
    halt_ext = list(stops.halt_on_extinction) or [True] * len(stops.extinction_sets)

    eps_masks = []
    eps_levels = []
    for names, eps in stops.epsilon_targets:
        level = math.floor(eps * K)
        if level < 1:
            raise ValueError(f"epsilon target {eps} unreachable: floor(eps*K) = {level} < 1")
        eps_masks.append(_subset_mask(names))
        eps_levels.append(level)
    eps_masks = np.array(eps_masks, dtype=np.int64)
    eps_levels = np.array(eps_levels, dtype=np.int64)
    halt_eps = list(stops.halt_on_epsilon) or [False] * len(stops.epsilon_targets)

    nb = stops.neighborhood_targets
    nb_centers = np.array([np.asarray(t.center, dtype=float) * K for t in nb],
                          dtype=np.float64).reshape(len(nb), 6) if nb else np.empty((0, 6))
    nb_deltas = np.array([t.delta * K for t in nb], dtype=np.float64)
    nb_extmasks = np.array([_subset_mask(t.require_extinct) for t in nb], dtype=np.int64)
    halt_nb = [t.halt for t in nb]

    if stops.resident_band is not None:
        names, center, halfwidth = stops.resident_band
        band_mask = _subset_mask(names)
        band_center = np.asarray(center, dtype=float) * K
        band_halfwidth = halfwidth * K
    else:
        band_mask = 0
        band_center = np.zeros(6)
        band_halfwidth = -1.0

    halts = np.array([stops.halt_on_beta] + halt_ext + halt_eps + halt_nb
                     + [stops.halt_on_band], dtype=np.bool_)
    hits = np.full(len(halts), np.nan)
    return (beta_level, ext_masks, eps_masks, eps_levels, nb_centers, nb_deltas,
            nb_extmasks, band_center, band_mask, band_halfwidth, hits, halts)


def run_ssa(params: ModelParams, initial: PopulationState, cfg: SsaConfig,
            stops: Optional[StoppingSpec] = None) -> SsaOutcome:
    """Simulate the exact jump chain until the first configured halting stop,
    an absorbing state, t_max, or the event cap."""
    stops = stops or StoppingSpec()
    (beta_level, ext_masks, eps_masks, eps_levels, nb_centers, nb_deltas,
     nb_extmasks, band_center, band_mask, band_halfwidth, hits, halts) = _pack_stops(params, stops)

    n = initial.as_array().copy()
    if cfg.record_stride > 0:
        max_rec = int(cfg.t_max / cfg.record_stride) + 2
    else:
        max_rec = 0
    rec_t = np.empty(max_rec, dtype=np.float64)
    rec_n = np.empty((max_rec, 6), dtype=np.int64)

    reason, t_final, events, n_rec = _kernels.ssa_core(
        params.rate_vector(), params.m, n, np.uint64(cfg.seed),
        cfg.t_max, cfg.event_cap, cfg.record_stride, rec_t, rec_n,
        beta_level, ext_masks, eps_masks, eps_levels,
        nb_centers, nb_deltas, nb_extmasks,
        band_center, band_mask, band_halfwidth, hits, halts)

    labels = stops.labels()
    hit_map = {lab: (None if math.isnan(h) else float(h)) for lab, h in zip(labels, hits)}
    return SsaOutcome(
        trajectory_times=rec_t[:n_rec].copy(),
        trajectory_states=rec_n[:n_rec].copy(),
        hits=hit_map,
        final_state=PopulationState.from_array(n),
        t_final=float(t_final),
        events_used=int(events),
        termination_reason=_REASONS[int(reason)],
    )


def replica_seed(base_seed: int, replica: int) -> int:
    """Deterministic independent stream for replica r (SplitMix-style hash)."""
    return int(_kernels.stream_seed(np.uint64(base_seed), np.uint64(replica)))


def mean_path(params: ModelParams, initial: PopulationState, cfg: SsaConfig,
              replicas: int, threads: int = 1) -> tuple:
    """Pointwise mean and standard error of the rescaled process N/K across
    independent seeded replicas on the record grid.

    Returns (times, mean, stderr) with mean/stderr of shape (n_times, 6).
    Replica seeds derive from cfg.seed, so the result is independent of the
    thread schedule.
    """
    if replicas < 2:
        raise ValueError("mean_path needs at least 2 replicas")
    if cfg.record_stride <= 0:
        raise ValueError("mean_path needs record_stride > 0")

    def one(rep: int):
        rep_cfg = SsaConfig(seed=replica_seed(cfg.seed, rep), t_max=cfg.t_max,
                            event_cap=cfg.event_cap, record_stride=cfg.record_stride)
        out = run_ssa(params, initial, rep_cfg)
        return out.trajectory_times, out.rescaled_trajectory(params.K)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(replicas)))
    else:
        results = [one(rep) for rep in range(replicas)]

    n_times = min(len(t) for t, _ in results)
    times = results[0][0][:n_times]
    stack = np.stack([traj[:n_times] for _, traj in results])
    mean = stack.mean(axis=0)
    stderr = stack.std(axis=0, ddof=1) / math.sqrt(replicas)
    return times, mean, stderr


def write_trajectory_csv(path, outcome: SsaOutcome) -> None:
    """CSV of absolute counts with header time,n1a,n1i,n2a,n2d,n2i,n3."""
    with open(path, "w") as fh:
        fh.write("time,n1a,n1i,n2a,n2d,n2i,n3\n")
        for t, row in zip(outcome.trajectory_times, outcome.trajectory_states):
            fh.write("%.17g," % t + ",".join(str(int(x)) for x in row) + "\n")


def write_hits_json(path, outcome: SsaOutcome) -> None:
    """Sidecar JSON of stopping-time hits ('not hit' encoded as null)."""
    payload = {
        "hits": outcome.hits,
        "termination_reason": outcome.termination_reason,
        "t_final": outcome.t_final,
        "events_used": outcome.events_used,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
