"""Monte-Carlo invasion experiments: a single invader against a resident in
stable coexistence with the virus, replicated over seeds and carrying
capacities.

Per replica the exact chain runs to the first of: all types macroscopic
(T_beta), invader extinction (T_0), or the time/event caps. In fate mode the
run continues to a delta-neighborhood of the six-type coexistence point or to
a fixation neighborhood (resident or invader eliminated exactly).

Success statistics are compared against the branching-process limit
(1 - s from the fixed-point solver, timescale 1/lambda); fate statistics are
evidence for the conjectured post-invasion behaviour and are labeled as such.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .branching import branching_report, perron
from .equilibria import (
    NoCoexistence,
    coexistence_equilibrium,
    dormancy_virus_equilibrium,
    host_virus_equilibrium,
)
from .model import ModelParams, PopulationState
from .ssa import (
    DEFAULT_BETA,
    DEFAULT_DELTA,
    NeighborhoodTarget,
    SsaConfig,
    StoppingSpec,
    replica_seed,
    run_ssa,
)
from .stability import jacobian3, jacobian4, spectrum_report


class PreconditionError(RuntimeError):
    """The experiment's hypotheses do not hold (e.g. unstable resident)."""


@dataclass(frozen=True)
class InvasionExperiment:
    direction: str                 # "inv2": type 2 invades (1,3); "inv1": type 1 invades (2,3)
    params: ModelParams
    K_list: tuple
    replicas: int
    beta: float = DEFAULT_BETA
    delta: float = DEFAULT_DELTA
    b_factor: float = 2.0          # resident-band width multiplier (knob, >= 2 in the theory)
    t_max: float = 1e3
    event_cap: int = 5 * 10 ** 9
    base_seed: int = 1729
    fate_mode: bool = False

    def __post_init__(self):
        if self.direction not in ("inv2", "inv1"):
            raise ValueError("direction must be 'inv2' or 'inv1'")
        if not self.K_list:
            raise ValueError("K_list must be nonempty")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _resident_equilibrium(exp: InvasionExperiment):
    p = exp.params
    if exp.direction == "inv2":
        eq = host_virus_equilibrium(p)
        rep = spectrum_report(jacobian3(p, eq))
        name = "n_star"
    else:
        eq = dormancy_virus_equilibrium(p)
        rep = spectrum_report(jacobian4(p, eq))
        name = "n_tilde"
    if rep.classification != "hyperbolically-stable":
        raise PreconditionError(
            f"resident equilibrium {name} is {rep.classification}; the "
            "branching-process invasion limit assumes an asymptotically stable resident")
    return eq


def _initial_state(exp: InvasionExperiment, eq, K: float) -> PopulationState:
    if exp.direction == "inv2":
        n1a, n1i, n3 = eq
        return PopulationState(round(K * n1a), round(K * n1i), 1, 0, 0, round(K * n3))
    t2a, t2d, t2i, t3 = eq
    return PopulationState(1, 0, round(K * t2a), round(K * t2d), round(K * t2i), round(K * t3))


def _fate_targets(exp: InvasionExperiment) -> list:
    p = exp.params
    targets = []
    coex = coexistence_equilibrium(p)
    if coex.exists and coex.positive:
        targets.append(NeighborhoodTarget(center=coex.x, delta=exp.delta,
                                          require_extinct=(), halt=True, label="x_nbhd"))
    try:
        t2a, t2d, t2i, t3 = dormancy_virus_equilibrium(p)
        center = np.array([0, 0, t2a, t2d, t2i, t3])
        targets.append(NeighborhoodTarget(center=center, delta=exp.delta,
                                          require_extinct=("1a", "1i"), halt=True,
                                          label="fix_ntilde"))
    except NoCoexistence:
        pass
    try:
        n1a, n1i, n3 = host_virus_equilibrium(p)
        center = np.array([n1a, n1i, 0, 0, 0, n3])
        targets.append(NeighborhoodTarget(center=center, delta=exp.delta,
                                          require_extinct=("2a", "2d", "2i"), halt=True,
                                          label="fix_nstar"))
    except NoCoexistence:
        pass
    return targets


@dataclass
class ReplicaRow:
    K: float
    replica: int
    outcome: str                   # success | failure | undecided
    t_beta: Optional[float]
    t_0: Optional[float]
    fate: Optional[str]
    fate_time: Optional[float]


@dataclass
class InvasionResult:
    experiment: InvasionExperiment
    per_K: list
    theory: dict
    rows: list = field(default_factory=list)

    def to_json(self, path=None) -> str:
        payload = {
            "direction": self.experiment.direction,
            "beta": self.experiment.beta,
            "delta": self.experiment.delta,
            "t_max": self.experiment.t_max,
            "base_seed": self.experiment.base_seed,
            "fate_mode": self.experiment.fate_mode,
            "theory": self.theory,
            "per_K": self.per_K,
        }
        text = json.dumps(payload, indent=2, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def write_replicas_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("K,replica,outcome,T_beta,T_0,fate,fate_time\n")
            for row in self.rows:
                fh.write("%g,%d,%s,%s,%s,%s,%s\n" % (
                    row.K, row.replica, row.outcome,
                    "" if row.t_beta is None else "%.17g" % row.t_beta,
                    "" if row.t_0 is None else "%.17g" % row.t_0,
                    row.fate or "",
                    "" if row.fate_time is None else "%.17g" % row.fate_time))


def _theory_block(exp: InvasionExperiment) -> dict:
    p = exp.params
    rep = branching_report(p, exp.direction)
    theory = {
        "one_minus_s": 1.0 - float(rep.extinction_probs[0]),
        "s_first": float(rep.extinction_probs[0]),
        "criticality": rep.criticality,
        "perron_value": float(rep.perron_value),
        "inv_lambda": (1.0 / float(rep.perron_value)) if rep.perron_value > 0 else None,
    }
    # both growth rates, for the fixation-time comparison (conjecture evidence)
    try:
        other = "inv1" if exp.direction == "inv2" else "inv2"
        other_value, _ = perron(p, other)
        theory["other_perron_value"] = float(other_value)
        if rep.perron_value > 0 and other_value > 0:
            theory["inv_lambda_sum"] = 1.0 / float(rep.perron_value) + 1.0 / float(other_value)
    except (NoCoexistence, ValueError):
        pass
    return theory


def run_invasion(exp: InvasionExperiment, threads: int = 1) -> InvasionResult:
    """Run the experiment; refuses (PreconditionError) when the resident
    equilibrium is missing or not hyperbolically stable."""
    p = exp.params
    eq = _resident_equilibrium(exp)
    for K in exp.K_list:
        if K * min(eq) < 10:
            raise PreconditionError(
                f"K = {K} too small: K * min(resident equilibrium) = {K * min(eq):.2f} < 10")
    coex = coexistence_equilibrium(p)
    if coex.exists and coex.positive and not exp.beta < 0.5 * float(np.min(coex.x)):
        warnings.warn(
            f"beta = {exp.beta} is not below half the smallest coordinate of the "
            f"coexistence point ({float(np.min(coex.x)):.4g}); T_beta may sit close "
            "to the equilibrium itself", stacklevel=2)

    invader_set = ("2a", "2d", "2i") if exp.direction == "inv2" else ("1a", "1i")
    fate_targets = _fate_targets(exp) if exp.fate_mode else []

    theory = _theory_block(exp)
    per_K = []
    rows = []
    for k_idx, K in enumerate(exp.K_list):
        pK = p.with_updates(K=float(K))
        init = _initial_state(exp, eq, float(K))
        k_seed = replica_seed(exp.base_seed, 1_000_003 * (k_idx + 1))
        stops = StoppingSpec(
            beta=exp.beta,
            halt_on_beta=not exp.fate_mode,
            extinction_sets=[invader_set],
            halt_on_extinction=[not exp.fate_mode],
            neighborhood_targets=fate_targets,
        )
        cfg_base = dict(t_max=exp.t_max, event_cap=exp.event_cap)

        def one(rep: int, _pK=pK, _init=init, _stops=stops, _k_seed=k_seed, _K=K):
            cfg = SsaConfig(seed=replica_seed(_k_seed, rep), **cfg_base)
            out = run_ssa(_pK, _init, cfg, _stops)
            t_beta = out.hits.get("T_beta")
            t_0 = out.hits.get("T_0^{%s}" % ",".join(invader_set))
            if t_beta is not None and (t_0 is None or t_beta < t_0):
                outcome = "success"
            elif t_0 is not None:
                outcome = "failure"
            else:
                outcome = "undecided"
            fate = None
            fate_time = None
            for tgt in fate_targets:
                hit = out.hits.get(tgt.label)
                if hit is not None and (fate_time is None or hit < fate_time):
                    fate = tgt.label
                    fate_time = hit
            if exp.fate_mode and fate is None:
                fate = "undecided"
            return ReplicaRow(K=float(_K), replica=rep, outcome=outcome,
                              t_beta=t_beta, t_0=t_0, fate=fate, fate_time=fate_time)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                k_rows = list(pool.map(one, range(exp.replicas)))
        else:
            k_rows = [one(rep) for rep in range(exp.replicas)]
        rows.extend(k_rows)

        logK = math.log(K)
        succ = [r for r in k_rows if r.outcome == "success"]
        fail = [r for r in k_rows if r.outcome == "failure"]
        undecided = [r for r in k_rows if r.outcome == "undecided"]
        tb = np.array([r.t_beta for r in succ]) / logK if succ else np.array([])
        t0 = np.array([r.t_0 for r in fail]) / logK if fail else np.array([])
        entry = {
            "K": float(K),
            "replicas": exp.replicas,
            "successes": len(succ),
            "failures": len(fail),
            "undecided": len(undecided),
            "p_hat": len(succ) / exp.replicas,
            "wilson95": wilson_interval(len(succ), exp.replicas),
            "tbeta_over_logK": {
                "mean": float(tb.mean()) if tb.size else None,
                "median": float(np.median(tb)) if tb.size else None,
                "q10": float(np.quantile(tb, 0.1)) if tb.size else None,
                "q90": float(np.quantile(tb, 0.9)) if tb.size else None,
            },
            "t0_over_logK_median": float(np.median(t0)) if t0.size else None,
        }
        if exp.fate_mode:
            tallies = {"x_nbhd": 0, "fix_ntilde": 0, "fix_nstar": 0, "undecided": 0}
            fate_times = []
            for r in succ:
                tallies[r.fate or "undecided"] = tallies.get(r.fate or "undecided", 0) + 1
                if r.fate_time is not None and r.fate in ("fix_ntilde", "fix_nstar"):
                    fate_times.append(r.fate_time / logK)
            entry["fate_of_successes"] = tallies
            entry["fixation_time_over_logK_mean"] = (
                float(np.mean(fate_times)) if fate_times else None)
            entry["note"] = ("fate tallies are evidence for conjectured post-invasion "
                             "behaviour, not a proven limit")
        per_K.append(entry)
    return InvasionResult(experiment=exp, per_K=per_K, theory=theory, rows=rows)


def run_fate(exp: InvasionExperiment, threads: int = 1) -> InvasionResult:
    """Convenience wrapper: the same experiment with fate continuation on."""
    if not exp.fate_mode:
        exp = InvasionExperiment(**{**exp.__dict__, "fate_mode": True})
    return run_invasion(exp, threads=threads)
