"""Closed-form equilibria of every subsystem, plus the invasion thresholds.

Naming convention throughout the package:

  bar_n1a, bar_n2a          logistic monoculture levels (lambda_i - mu1) / C
  n_star  = (n1a*, n1i*, n3*)          host-virus coexistence (no dormancy)
  n_tilde = (~n2a, ~n2d, ~n2i, ~n3)    dormancy-host-virus coexistence
  x       = six-type coexistence equilibrium

n3*, n1i*, ~n3, ~n2d, ~n2i carry no displayed closed form in the usual
presentations; they are derived by zeroing the subsystem right-hand sides and
every reported equilibrium is guarded by a residual check in the tests rather
than trusted from the algebra.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .model import ModelParams

# conditions closer to equality than this are flagged critical
CRITICAL_TOL = 1e-12


class NoCoexistence(Exception):
    """Signals that a coexistence equilibrium does not exist; carries the
    inequality that failed."""

    def __init__(self, failed: str):
        self.failed = failed
        super().__init__(failed)


def lv_equilibria(params: ModelParams) -> tuple:
    """Monoculture levels (bar_n1a, bar_n2a) of the logistic pair."""
    if params.C <= 0:
        raise ValueError("competition strength C must be positive")
    return ((params.lambda1 - params.mu1) / params.C,
            (params.lambda2 - params.mu1) / params.C)


def host_virus_equilibrium(params: ModelParams) -> tuple:
    """(n1a*, n1i*, n3*), or raise NoCoexistence with the failed inequality.

    Exists iff m v > r + v and bar_n1a > n1a* = mu3 (r+v) / (D (m v - (r+v))).
    """
    p = params
    rv = p.r + p.v
    if not p.m * p.v > rv:
        raise NoCoexistence("mv <= r+v")
    n1a = p.mu3 * rv / (p.D * (p.m * p.v - rv))
    bar_n1a, _ = lv_equilibria(p)
    if not bar_n1a > n1a:
        raise NoCoexistence("bar_n1a <= n1a_star")
    n3 = (p.lambda1 - p.mu1 - p.C * n1a) * rv / (p.D * (p.C * n1a + p.v))
    n1i = p.D * n1a * n3 / rv
    return (n1a, n1i, n3)


def dormancy_virus_equilibrium(params: ModelParams) -> tuple:
    """(~n2a, ~n2d, ~n2i, ~n3), or raise NoCoexistence.

    Exists iff m v > r + v and bar_n2a > ~n2a = mu3 (r+v) / ((1-q) D (m v - (r+v))).
    """
    p = params
    if p.q >= 1:
        raise NoCoexistence("q = 1 (no infection channel)")
    rv = p.r + p.v
    if not p.m * p.v > rv:
        raise NoCoexistence("mv <= r+v")
    t2a = p.mu3 * rv / ((1.0 - p.q) * p.D * (p.m * p.v - rv))
    _, bar_n2a = lv_equilibria(p)
    if not bar_n2a > t2a:
        raise NoCoexistence("bar_n2a <= ntilde_2a")
    km = p.kappa * p.mu1 + p.sigma
    denom = p.D * (p.C * t2a * (p.q / km + (1.0 - p.q) / rv)
                   + p.q * p.kappa * p.mu1 / km + (1.0 - p.q) * p.v / rv)
    t3 = (p.lambda2 - p.mu1 - p.C * t2a) / denom
    t2d = p.q * p.D * t2a * t3 / km
    t2i = (1.0 - p.q) * p.D * t2a * t3 / rv
    return (t2a, t2d, t2i, t3)


@dataclass
class CoexistenceEquilibrium:
    """The unique coordinatewise nonzero equilibrium of the six-type system."""

    x: np.ndarray                  # (x1a, x1i, x2a, x2d, x2i, x3)
    exists: bool                   # False when a degeneracy precludes it
    positive: bool                 # all six coordinates strictly positive
    degenerate_reason: Optional[str] = None

    @property
    def x3(self) -> float:
        return float(self.x[5]) if self.x is not None else math.nan


def coexistence_equilibrium(params: ModelParams) -> CoexistenceEquilibrium:
    """Solve for x via the virion level x3 and the 2x2 linear system on
    (x1a, x2a); the remaining coordinates follow from the fixed ratios
    x1i = a x1a, x2i = b x2a, x2d = g x2a.

    Degenerate when q = 0, r kappa mu1 = v sigma, m v = r + v or
    lambda1 = lambda2; negative coordinates are reported, never suppressed.
    """
    p = params
    rv = p.r + p.v
    km = p.kappa * p.mu1 + p.sigma
    sign_split = p.r * p.kappa * p.mu1 - p.v * p.sigma
    if p.q <= 0:
        return CoexistenceEquilibrium(None, False, False, "q = 0")
    if sign_split == 0:
        return CoexistenceEquilibrium(None, False, False, "r*kappa*mu1 = v*sigma")
    if p.m * p.v == rv:
        return CoexistenceEquilibrium(None, False, False, "mv = r+v")
    if p.lambda1 == p.lambda2:
        return CoexistenceEquilibrium(None, False, False, "lambda1 = lambda2")
    x3 = (p.lambda2 - p.lambda1) / (p.q * p.D) * (km * rv) / sign_split
    a = p.D * x3 / rv
    b = (1.0 - p.q) * p.D * x3 / rv
    g = p.q * p.D * x3 / km
    n1a_star = p.mu3 * rv / (p.D * (p.m * p.v - rv))
    total = (p.lambda1 - p.mu1 - p.D * x3 * p.v / rv) / p.C
    # x1a + (1-q) x2a = n1a_star ; (1+a) x1a + (1+b+g) x2a = total
    det = (1.0 + b + g) - (1.0 - p.q) * (1.0 + a)
    if det == 0:
        return CoexistenceEquilibrium(None, False, False, "singular 2x2 system")
    x1a = (n1a_star * (1.0 + b + g) - (1.0 - p.q) * total) / det
    x2a = (total - n1a_star * (1.0 + a)) / det
    x = np.array([x1a, a * x1a, x2a, g * x2a, b * x2a, x3])
    positive = bool(np.all(x > 0))
    return CoexistenceEquilibrium(x, True, positive)


def invasion_thresholds(params: ModelParams) -> tuple:
    """(theta_star, theta_tilde): the dormancy-benefit thresholds evaluated at
    the virion levels n3* and ~n3. NaN when the base equilibrium is missing."""
    p = params
    factor = p.q * p.D * (p.v * p.sigma - p.r * p.kappa * p.mu1) / (
        (p.r + p.v) * (p.kappa * p.mu1 + p.sigma))
    try:
        n_star = host_virus_equilibrium(p)
        theta_star = factor * n_star[2]
    except NoCoexistence:
        theta_star = math.nan
    try:
        n_tilde = dormancy_virus_equilibrium(p)
        theta_tilde = factor * n_tilde[3]
    except NoCoexistence:
        theta_tilde = math.nan
    return theta_star, theta_tilde


@dataclass
class EquilibriumReport:
    """Every named equilibrium with existence flags, the invasion thresholds
    and the condition booleans used by the regime classifier."""

    bar_n1a: float
    bar_n2a: float
    n_star: Optional[tuple]
    n_star_failed: Optional[str]
    n_tilde: Optional[tuple]
    n_tilde_failed: Optional[str]
    x: Optional[list]
    x_exists: bool
    x_positive: bool
    x_degenerate_reason: Optional[str]
    theta_star: float
    theta_tilde: float
    coex13: bool
    coex23: bool
    inv2: Optional[bool]           # None when not applicable (no base equilibrium)
    inv1: Optional[bool]
    critical: bool                 # some condition within CRITICAL_TOL of equality
    degenerate: bool               # q=0, r kappa mu1 = v sigma, mv = r+v or lambda1=lambda2

    def to_json(self, path=None) -> str:
        d = asdict(self)
        if self.x is not None:
            d["x"] = [float(v) for v in self.x]
        text = json.dumps(d, indent=2, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def invasion_conditions(params: ModelParams) -> EquilibriumReport:
    """Assemble the full report: equilibria, thresholds, and both invasion
    conditions inv2: lambda1 - lambda2 < theta_star (type 2 invades the
    host-virus equilibrium) and inv1: lambda1 - lambda2 > theta_tilde (type 1
    invades the dormancy equilibrium). Conditions within CRITICAL_TOL of
    equality are flagged critical."""
    p = params
    bar_n1a, bar_n2a = lv_equilibria(p)
    n_star = n_tilde = None
    n_star_failed = n_tilde_failed = None
    try:
        n_star = host_virus_equilibrium(p)
    except NoCoexistence as exc:
        n_star_failed = exc.failed
    try:
        n_tilde = dormancy_virus_equilibrium(p)
    except NoCoexistence as exc:
        n_tilde_failed = exc.failed
    coex = coexistence_equilibrium(p)
    theta_star, theta_tilde = invasion_thresholds(p)
    diff = p.lambda1 - p.lambda2

    critical = False
    inv2 = inv1 = None
    if n_star is not None:
        inv2 = bool(diff < theta_star)
        if abs(diff - theta_star) < CRITICAL_TOL:
            critical = True
    if n_tilde is not None:
        inv1 = bool(diff > theta_tilde)
        if abs(diff - theta_tilde) < CRITICAL_TOL:
            critical = True

    degenerate = (p.q == 0 or p.r * p.kappa * p.mu1 == p.v * p.sigma
                  or p.m * p.v == p.r + p.v or p.lambda1 == p.lambda2)

    return EquilibriumReport(
        bar_n1a=bar_n1a,
        bar_n2a=bar_n2a,
        n_star=n_star,
        n_star_failed=n_star_failed,
        n_tilde=n_tilde,
        n_tilde_failed=n_tilde_failed,
        x=None if coex.x is None else [float(v) for v in coex.x],
        x_exists=coex.exists,
        x_positive=coex.positive,
        x_degenerate_reason=coex.degenerate_reason,
        theta_star=theta_star,
        theta_tilde=theta_tilde,
        coex13=n_star is not None,
        coex23=n_tilde is not None,
        inv2=inv2,
        inv1=inv1,
        critical=critical,
        degenerate=degenerate,
    )


def boundary_equilibrium_6d(which: str, params: ModelParams) -> np.ndarray:
    """Embed a named equilibrium into the six-type state space."""
    p = params
    if which == "lv1":
        bar_n1a, _ = lv_equilibria(p)
        return np.array([bar_n1a, 0, 0, 0, 0, 0], dtype=float)
    if which == "lv2":
        _, bar_n2a = lv_equilibria(p)
        return np.array([0, 0, bar_n2a, 0, 0, 0], dtype=float)
    if which == "n_star":
        n1a, n1i, n3 = host_virus_equilibrium(p)
        return np.array([n1a, n1i, 0, 0, 0, n3])
    if which == "n_tilde":
        t2a, t2d, t2i, t3 = dormancy_virus_equilibrium(p)
        return np.array([0, 0, t2a, t2d, t2i, t3])
    if which == "x":
        coex = coexistence_equilibrium(p)
        if not coex.exists:
            raise NoCoexistence(coex.degenerate_reason or "x degenerate")
        return coex.x.copy()
    raise ValueError(f"unknown equilibrium {which!r}")


def condition_table(report: EquilibriumReport, params: Optional[ModelParams] = None) -> str:
    """Human-readable condition summary mirroring the outcome-table columns:
    the sign of the dormancy-benefit split v*sigma - r*kappa*mu1, the ordering
    of the virion levels, positivity of x, and both invasion verdicts."""
    def yn(b):
        return "-" if b is None else ("yes" if b else "no")

    lines = []
    lines.append(f"bar_n1a = {report.bar_n1a:.6g}   bar_n2a = {report.bar_n2a:.6g}")
    if report.n_star:
        lines.append("n*      = (%.6g, %.6g, %.6g)" % report.n_star)
    else:
        lines.append(f"n*      : does not exist ({report.n_star_failed})")
    if report.n_tilde:
        lines.append("n~      = (%.6g, %.6g, %.6g, %.6g)" % report.n_tilde)
    else:
        lines.append(f"n~      : does not exist ({report.n_tilde_failed})")
    if report.x is not None:
        lines.append("x       = (" + ", ".join("%.6g" % v for v in report.x) + ")"
                      + ("  [coordinatewise positive]" if report.x_positive else "  [not positive]"))
    else:
        lines.append(f"x       : degenerate ({report.x_degenerate_reason})")
    lines.append(f"theta*  = {report.theta_star:.6g}   theta~ = {report.theta_tilde:.6g}")
    if params is not None:
        split = params.v * params.sigma - params.r * params.kappa * params.mu1
        lines.append(f"v*sigma - r*kappa*mu1 = {split:+.6g} "
                     f"(dormancy escape {'beats' if split > 0 else 'loses to'} recovery)")
    levels = []
    if report.n_tilde:
        levels.append(("n~3", report.n_tilde[3]))
    if report.x is not None:
        levels.append(("x3", report.x[5]))
    if report.n_star:
        levels.append(("n3*", report.n_star[2]))
    if len(levels) >= 2:
        ordered = sorted(levels, key=lambda kv: kv[1])
        lines.append("virion levels: " + " < ".join(f"{k}={v:.6g}" for k, v in ordered))
    lines.append(f"coex13 = {yn(report.coex13)}   coex23 = {yn(report.coex23)}   "
                 f"inv2 = {yn(report.inv2)}   inv1 = {yn(report.inv1)}"
                 + ("   CRITICAL" if report.critical else ""))
    return "\n".join(lines)
