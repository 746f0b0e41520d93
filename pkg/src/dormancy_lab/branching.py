"""Multi-type branching processes approximating a rare invader in a frozen
resident environment: mean matrices, extinction probabilities via the
first-jump fixed point, Perron growth data, and an exact simulation oracle.

Direction "inv2": three types (2a, 2d, 2i) against the frozen host-virus
equilibrium n*. Direction "inv1": two types (1a, 1i) against the frozen
dormancy equilibrium n~.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .equilibria import dormancy_virus_equilibrium, host_virus_equilibrium
from .model import ModelParams

FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAX_ITER = 10_000_000
PERRON_TOL = 1e-12
CRITICAL_BAND = 1e-6   # |perron value| below this is reported critical


@dataclass(frozen=True)
class BpChannel:
    delta: tuple      # state change on the invader types
    which: int        # index of the type whose count scales the rate
    coeff: float      # per-capita rate
    label: str


def bp_rates_inv2(params: ModelParams, n_star=None) -> list:
    """The 8 transition channels of the (2a, 2d, 2i) invader process."""
    p = params
    if n_star is None:
        n_star = host_virus_equilibrium(p)
    n1a, n1i, n3 = n_star
    death = p.mu1 + p.C * (n1a + n1i)
    return [
        BpChannel((+1, 0, 0), 0, p.lambda2, "2a birth"),
        BpChannel((-1, 0, 0), 0, death, "2a death"),
        BpChannel((-1, 0, +1), 0, (1.0 - p.q) * p.D * n3, "2a infection"),
        BpChannel((-1, +1, 0), 0, p.q * p.D * n3, "2a dormancy"),
        BpChannel((+1, -1, 0), 1, p.sigma, "2d resuscitation"),
        BpChannel((0, -1, 0), 1, p.kappa * p.mu1, "2d death"),
        BpChannel((+1, 0, -1), 2, p.r, "2i recovery"),
        BpChannel((0, 0, -1), 2, p.v, "2i lysis"),
    ]


def bp_rates_inv1(params: ModelParams, n_tilde=None) -> list:
    """The 5 transition channels of the (1a, 1i) invader process."""
    p = params
    if n_tilde is None:
        n_tilde = dormancy_virus_equilibrium(p)
    t2a, t2d, t2i, t3 = n_tilde
    death = p.mu1 + p.C * (t2a + t2d + t2i)
    return [
        BpChannel((+1, 0), 0, p.lambda1, "1a birth"),
        BpChannel((-1, 0), 0, death, "1a death"),
        BpChannel((-1, +1), 0, p.D * t3, "1a infection"),
        BpChannel((+1, -1), 1, p.r, "1i recovery"),
        BpChannel((0, -1), 1, p.v, "1i lysis"),
    ]


def _channels(params: ModelParams, which: str, base_equilibrium=None) -> list:
    if which == "inv2":
        return bp_rates_inv2(params, base_equilibrium)
    if which == "inv1":
        return bp_rates_inv1(params, base_equilibrium)
    raise ValueError("which must be 'inv2' or 'inv1'")


def mean_matrix(params: ModelParams, which: str = "inv2", base_equilibrium=None) -> np.ndarray:
    """Mean matrix M with M[i, j] = net production rate of type j per type-i
    individual; entrywise the transpose of the invader block of the boundary
    Jacobian (same arithmetic, so the identity is exact in floating point)."""
    p = params
    if which == "inv2":
        if base_equilibrium is None:
            base_equilibrium = host_virus_equilibrium(p)
        n1a, n1i, n3 = base_equilibrium
        return np.array([
            [p.lambda2 - p.mu1 - p.C * (n1a + n1i) - p.D * n3,
             p.q * p.D * n3, (1.0 - p.q) * p.D * n3],
            [p.sigma, -(p.kappa * p.mu1 + p.sigma), 0.0],
            [p.r, 0.0, -(p.r + p.v)],
        ])
    if which == "inv1":
        if base_equilibrium is None:
            base_equilibrium = dormancy_virus_equilibrium(p)
        t2a, t2d, t2i, t3 = base_equilibrium
        t2 = t2a + t2d + t2i
        return np.array([
            [p.lambda1 - p.mu1 - p.C * t2 - p.D * t3, p.D * t3],
            [p.r, -(p.r + p.v)],
        ])
    raise ValueError("which must be 'inv2' or 'inv1'")


def mean_matrix_from_channels(params: ModelParams, which: str = "inv2",
                              base_equilibrium=None) -> np.ndarray:
    """Channel-sum construction of the mean matrix, used as a cross-check of
    the closed form (agrees up to floating-point regrouping)."""
    chans = _channels(params, which, base_equilibrium)
    ntypes = len(chans[0].delta)
    M = np.zeros((ntypes, ntypes))
    for ch in chans:
        for j, d in enumerate(ch.delta):
            if d:
                M[ch.which, j] += ch.coeff * d
    return M


def _fixed_point_map(params: ModelParams, which: str, base_equilibrium=None):
    """First-jump extinction map s -> f(s) together with the stationary
    "=0" residual form used for verification and Newton polish."""
    p = params
    chans = _channels(params, which, base_equilibrium)
    if which == "inv2":
        death = chans[1].coeff
        inf_rate = chans[2].coeff
        dorm_rate = chans[3].coeff
        R2a = p.lambda2 + death + inf_rate + dorm_rate
        R2d = p.sigma + p.kappa * p.mu1
        R2i = p.r + p.v

        def f(s):
            s2a, s2d, s2i = s
            return np.array([
                (p.lambda2 * s2a * s2a + death + inf_rate * s2i + dorm_rate * s2d) / R2a,
                (p.kappa * p.mu1 + p.sigma * s2a) / R2d,
                (p.r * s2a + p.v) / R2i,
            ])

        def residual(s):
            s2a, s2d, s2i = s
            return np.array([
                p.lambda2 * (s2a * s2a - s2a) + death * (1.0 - s2a)
                + inf_rate * (s2i - s2a) + dorm_rate * (s2d - s2a),
                p.kappa * p.mu1 * (1.0 - s2d) + p.sigma * (s2a - s2d),
                p.r * (s2a - s2i) + p.v * (1.0 - s2i),
            ])

        def jac(s):
            s2a = s[0]
            return np.array([
                [p.lambda2 * (2 * s2a - 1.0) - death - inf_rate - dorm_rate, dorm_rate, inf_rate],
                [p.sigma, -(p.kappa * p.mu1 + p.sigma), 0.0],
                [p.r, 0.0, -(p.r + p.v)],
            ])

        return f, residual, jac, 3
    death = chans[1].coeff
    inf_rate = chans[2].coeff
    R1a = p.lambda1 + death + inf_rate
    R1i = p.r + p.v

    def f(s):
        s1a, s1i = s
        return np.array([
            (p.lambda1 * s1a * s1a + death + inf_rate * s1i) / R1a,
            (p.r * s1a + p.v) / R1i,
        ])

    def residual(s):
        s1a, s1i = s
        return np.array([
            p.lambda1 * (s1a * s1a - s1a) + death * (1.0 - s1a) + inf_rate * (s1i - s1a),
            p.r * (s1a - s1i) + p.v * (1.0 - s1i),
        ])

    def jac(s):
        s1a = s[0]
        return np.array([
            [p.lambda1 * (2 * s1a - 1.0) - death - inf_rate, inf_rate],
            [p.r, -(p.r + p.v)],
        ])

    return f, residual, jac, 2


class FixedPointDivergence(RuntimeError):
    pass


def extinction_probs(params: ModelParams, which: str = "inv2", base_equilibrium=None,
                     monotone_trace: Optional[list] = None) -> np.ndarray:
    """Coordinatewise smallest positive solution of the extinction system.

    Iterates the first-jump map from 0 (monotone nondecreasing, so the limit
    is the minimal fixed point), then one Newton polish on the stationary
    form. monotone_trace, when given, collects the iterates for property
    checks.
    """
    f, residual, jac, ntypes = _fixed_point_map(params, which, base_equilibrium)
    s = np.zeros(ntypes)
    for _ in range(FIXED_POINT_MAX_ITER):
        s_new = f(s)
        if monotone_trace is not None:
            monotone_trace.append(s_new.copy())
        if np.any(s_new + 1e-15 < s):
            raise FixedPointDivergence("fixed-point iteration lost monotonicity")
        if float(np.max(np.abs(s_new - s))) < FIXED_POINT_TOL:
            s = s_new
            break
        s = s_new
    else:
        raise FixedPointDivergence(
            "fixed-point iteration cap exceeded (near-critical parameters)")
    # one Newton step pushes the stationary residual to rounding level
    r = residual(s)
    try:
        step = np.linalg.solve(jac(s), -r)
        s_polished = s + step
        if np.all(s_polished > 0) and np.all(s_polished <= 1.0 + 1e-12):
            if np.max(np.abs(residual(s_polished))) <= np.max(np.abs(r)):
                s = np.minimum(s_polished, 1.0)
    except np.linalg.LinAlgError:
        pass
    return s


def perron(params: ModelParams, which: str = "inv2", base_equilibrium=None) -> tuple:
    """(perron_value, left_vector): power iteration on M^T + rho I with
    rho = 1 + max |diagonal|; the left vector is nonnegative and sums to 1.

    Requires an irreducible mean matrix (r > 0, sigma > 0, 0 < q < 1 for the
    three-type direction)."""
    p = params
    if which == "inv2" and not (p.r > 0 and p.sigma > 0 and 0 < p.q < 1):
        raise ValueError("mean matrix not irreducible: need r > 0, sigma > 0, q in (0,1)")
    if which == "inv1" and not (p.r > 0 and p.D > 0):
        raise ValueError("mean matrix not irreducible: need r > 0 and D > 0")
    M = mean_matrix(params, which, base_equilibrium)
    rho = 1.0 + float(np.max(np.abs(np.diag(M))))
    B = M.T + rho * np.eye(M.shape[0])
    v = np.ones(M.shape[0]) / M.shape[0]
    prev = math.inf
    for _ in range(1_000_000):
        w = B @ v
        v = w / np.linalg.norm(w)
        ray = float(v @ (B @ v))
        if abs(ray - prev) < PERRON_TOL:
            break
        prev = ray
    value = ray - rho
    v = np.abs(v)
    v = v / v.sum()
    return value, v


@dataclass
class BranchingReport:
    which: str
    mean_matrix: np.ndarray
    extinction_probs: np.ndarray
    criticality: str               # sub | super | critical
    perron_value: float
    perron_left_vector: Optional[np.ndarray]
    fixed_point_residual: float
    invasion_condition: str        # matching inequality, human-readable

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "mean_matrix": [[float(x) for x in row] for row in self.mean_matrix],
            "extinction_probs": [float(s) for s in self.extinction_probs],
            "criticality": self.criticality,
            "perron_value": float(self.perron_value),
            "perron_left_vector": None if self.perron_left_vector is None
            else [float(x) for x in self.perron_left_vector],
            "fixed_point_residual": float(self.fixed_point_residual),
            "invasion_condition": self.invasion_condition,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def branching_report(params: ModelParams, which: str = "inv2") -> BranchingReport:
    """Full report: mean matrix, minimal extinction probabilities, criticality
    from the Perron value sign (tolerance 1e-9 for criticality, and values
    inside +-1e-6 flagged critical rather than trusted), growth data."""
    base = host_virus_equilibrium(params) if which == "inv2" \
        else dormancy_virus_equilibrium(params)
    M = mean_matrix(params, which, base)
    value, vec = perron(params, which, base)
    if abs(value) < CRITICAL_BAND:
        crit = "critical"
    elif value > 0:
        crit = "super"
    else:
        crit = "sub"
    if crit == "critical":
        s = np.ones(M.shape[0])
    elif crit == "sub":
        s = np.ones(M.shape[0])
    else:
        s = extinction_probs(params, which, base)
    _, residual, _, _ = _fixed_point_map(params, which, base)
    res = float(np.max(np.abs(residual(s))))
    cond = ("lambda1 - lambda2 < theta_star (invader: type 2)" if which == "inv2"
            else "lambda1 - lambda2 > theta_tilde (invader: type 1)")
    return BranchingReport(
        which=which,
        mean_matrix=M,
        extinction_probs=s,
        criticality=crit,
        perron_value=value,
        perron_left_vector=vec if crit == "super" else None,
        fixed_point_residual=res,
        invasion_condition=cond,
    )


# ---------------------------------------------------------------------------
# Exact simulation oracle
# ---------------------------------------------------------------------------

def _channel_arrays(chans) -> tuple:
    coeffs = np.array([c.coeff for c in chans], dtype=np.float64)
    which = np.array([c.which for c in chans], dtype=np.int64)
    deltas = np.array([c.delta for c in chans], dtype=np.int64)
    return coeffs, which, deltas


def simulate_bp(params: ModelParams, which: str, initial, seed: int,
                t_max: float = 1000.0, base_equilibrium=None,
                survive_cutoff: int = 0, record_stride: float = 0.0,
                event_cap: int = 10 ** 9):
    """One exact path of the frozen-environment branching process.

    Returns (outcome, t, path) where outcome is "extinct", "survived"
    (total reached survive_cutoff), or "undecided"; path is the (time, state)
    record when record_stride > 0.
    """
    chans = _channels(params, which, base_equilibrium)
    coeffs, widx, deltas = _channel_arrays(chans)
    z = np.array(initial, dtype=np.int64)
    if z.shape != (deltas.shape[1],):
        raise ValueError(f"initial state must have {deltas.shape[1]} components")
    max_rec = int(t_max / record_stride) + 2 if record_stride > 0 else 0
    rec_t = np.empty(max_rec, dtype=np.float64)
    rec_z = np.empty((max_rec, z.shape[0]), dtype=np.int64)
    out, t, events, n_rec = _kernels.bp_run(
        coeffs, widx, deltas, z, np.uint64(seed), t_max,
        survive_cutoff, event_cap, record_stride, rec_t, rec_z)
    outcome = {0: "extinct", 1: "survived", 2: "undecided", 3: "undecided"}[int(out)]
    path = (rec_t[:n_rec].copy(), rec_z[:n_rec].copy()) if max_rec else None
    return outcome, float(t), path, z


def bp_extinction_frequency(params: ModelParams, which: str, n_replicas: int,
                            base_seed: int, initial=None,
                            survive_cutoff: int = 400, t_max: float = 1e9,
                            event_cap: int = 10 ** 8) -> dict:
    """Monte-Carlo extinction frequency from one active invader.

    A replica counts as survived once its total population reaches
    survive_cutoff; the residual misclassification probability is at most
    max(s)^cutoff, negligible against the binomial standard error for the
    cutoffs used here.
    """
    chans = _channels(params, which)
    coeffs, widx, deltas = _channel_arrays(chans)
    if initial is None:
        initial = np.zeros(deltas.shape[1], dtype=np.int64)
        initial[0] = 1
    init = np.array(initial, dtype=np.int64)
    extinct, survived, undecided = _kernels.bp_extinction_batch(
        coeffs, widx, deltas, init, n_replicas, np.uint64(base_seed),
        survive_cutoff, t_max, event_cap)
    freq = extinct / n_replicas
    return {
        "n_replicas": int(n_replicas),
        "extinct": int(extinct),
        "survived": int(survived),
        "undecided": int(undecided),
        "extinction_frequency": freq,
        "stderr": math.sqrt(max(freq * (1.0 - freq), 1e-300) / n_replicas),
    }
