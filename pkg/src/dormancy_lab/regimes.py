"""Classification of (lambda2, q) cells into the qualitative outcome regimes
and the grid sweep that produces the regime maps.

Regime names:

  Red                     no dormancy-virus coexistence, type 2 cannot invade
  Purple                  dormancy-virus coexistence, only type 1 invades
  DarkGreenCoex           both directions invade, stable six-type coexistence
  LightGreenCoex          six-type coexistence without type-2/virus coexistence
  Blue                    only type 2 invades, fixation of type 2 with virus
  Orange                  lambda2 > lambda1 without type-2/virus coexistence:
                          fixation of plain type 2a
  FounderControlCoex23    neither direction invades (dormancy-virus coexistence)
  FounderControlNoCoex23  neither invades, no type-2/virus coexistence
  NoEpidemic              resident host-virus equilibrium missing or unstable
  Critical                some decision margin within tolerance of equality
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .equilibria import (
    NoCoexistence,
    coexistence_equilibrium,
    dormancy_virus_equilibrium,
    host_virus_equilibrium,
    invasion_thresholds,
    lv_equilibria,
)
from .model import ModelParams
from .stability import NONHYPERBOLIC_TOL, eigenvalues, jacobian3, jacobian4

GRID_CRITICAL_TOL = 1e-9


@lru_cache(maxsize=4096)
def _n_star_stable_cached(lam1, mu1, C, D, r, v, m, mu3) -> Optional[bool]:
    """Hyperbolic stability of the host-virus equilibrium in its own
    subsystem; independent of lambda2 and q, so cached across grid cells."""
    p = ModelParams(lambda1=lam1, lambda2=lam1, mu1=mu1, C=C, D=D, q=0.0,
                    r=r, v=v, m=m, sigma=1.0, kappa=0.0, mu3=mu3)
    try:
        eq = host_virus_equilibrium(p)
    except NoCoexistence:
        return None
    re = eigenvalues(jacobian3(p, eq), residual_check=False).real
    if np.any(np.abs(re) < NONHYPERBOLIC_TOL):
        return None
    return bool(np.all(re < 0))


def _n_tilde_stable(params: ModelParams, n_tilde) -> Optional[bool]:
    re = eigenvalues(jacobian4(params, n_tilde), residual_check=False).real
    if np.any(np.abs(re) < NONHYPERBOLIC_TOL):
        return None
    return bool(np.all(re < 0))


REGIME_COLORS = {
    "Red": "red",
    "Purple": "purple",
    "DarkGreenCoex": "dark green",
    "LightGreenCoex": "light green",
    "Blue": "blue",
    "Orange": "orange",
    "FounderControlCoex23": "dark green",
    "FounderControlNoCoex23": "light green",
    "NoEpidemic": "gray",
    "Critical": "black",
}


@dataclass
class RegimeCell:
    lambda2: float
    q: float
    regime: str
    coex13: bool
    coex23: bool
    inv2: Optional[bool]
    inv1: Optional[bool]
    x3: float
    n3_star: float
    ntilde3: float
    n_star_stable: Optional[bool]
    n_tilde_stable: Optional[bool]
    x_positive: bool


def classify(params: ModelParams) -> RegimeCell:
    """Pure decision tree over existence, stability and invasion conditions.

    Cells where any margin sits within GRID_CRITICAL_TOL of equality are
    Critical (boundaries, excluded from the qualitative claims); cells whose
    resident host-virus equilibrium is missing or unstable are NoEpidemic.
    """
    p = params
    bar_n1a, bar_n2a = lv_equilibria(p)
    theta_star, theta_tilde = invasion_thresholds(p)
    diff = p.lambda1 - p.lambda2

    n_star = None
    n_star_stable = None
    try:
        n_star = host_virus_equilibrium(p)
        n_star_stable = _n_star_stable_cached(p.lambda1, p.mu1, p.C, p.D,
                                              p.r, p.v, p.m, p.mu3)
    except NoCoexistence:
        pass
    n_tilde = None
    n_tilde_stable = None
    try:
        n_tilde = dormancy_virus_equilibrium(p)
        n_tilde_stable = _n_tilde_stable(p, n_tilde)
    except NoCoexistence:
        pass
    coex_x = coexistence_equilibrium(p)

    n3_star = n_star[2] if n_star else math.nan
    ntilde3 = n_tilde[3] if n_tilde else math.nan
    x3 = coex_x.x3 if coex_x.exists else math.nan

    coex13 = n_star is not None
    coex23 = n_tilde is not None
    inv2 = (diff < theta_star) if coex13 else None
    inv1 = (diff > theta_tilde) if coex23 else None

    def cell(regime):
        return RegimeCell(
            lambda2=p.lambda2, q=p.q, regime=regime,
            coex13=coex13, coex23=coex23, inv2=inv2, inv1=inv1,
            x3=x3, n3_star=n3_star, ntilde3=ntilde3,
            n_star_stable=n_star_stable, n_tilde_stable=n_tilde_stable,
            x_positive=coex_x.positive)

    if not coex13:
        return cell("NoEpidemic")
    if n_star_stable is None:
        return cell("Critical")        # non-hyperbolic resident
    if not n_star_stable:
        return cell("NoEpidemic")
    if coex23 and n_tilde_stable is None:
        return cell("Critical")

    margins = [abs(bar_n1a - p.mu3 * (p.r + p.v) / (p.D * (p.m * p.v - (p.r + p.v))))
               if p.m * p.v > p.r + p.v else math.inf,
               abs(p.m * p.v - (p.r + p.v)),
               abs(diff - theta_star)]
    if coex23 or p.q < 1:
        try:
            t2a_level = p.mu3 * (p.r + p.v) / ((1.0 - p.q) * p.D * (p.m * p.v - (p.r + p.v)))
            margins.append(abs(bar_n2a - t2a_level))
        except ZeroDivisionError:
            pass
    if coex23:
        margins.append(abs(diff - theta_tilde))
    else:
        margins.append(abs(p.lambda2 - p.lambda1))
    if any(m < GRID_CRITICAL_TOL for m in margins):
        return cell("Critical")

    if coex23 and n_tilde_stable:
        if inv2 and inv1:
            return cell("DarkGreenCoex")
        if inv2 and not inv1:
            return cell("Blue")
        if not inv2 and inv1:
            return cell("Purple")
        return cell("FounderControlCoex23")
    # no dormancy-virus coexistence: the reverse invasion degenerates to the
    # virus-free competition, decided by the sign of lambda2 - lambda1
    if inv2 and p.lambda2 < p.lambda1:
        return cell("LightGreenCoex")
    if inv2 and p.lambda2 > p.lambda1:
        return cell("Orange")
    if not inv2 and p.lambda2 < p.lambda1:
        return cell("Red")
    return cell("FounderControlNoCoex23")


@dataclass
class RegimeGrid:
    base_params: ModelParams
    lambda2_values: np.ndarray
    q_values: np.ndarray
    cells: list = field(default_factory=list)

    def regimes_present(self) -> set:
        return {c.regime for c in self.cells}

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("lambda2,q,regime,coex13,coex23,inv2,inv1,x3,n3_star,ntilde3\n")
            for c in self.cells:
                fh.write("%.17g,%.17g,%s,%d,%d,%s,%s,%.17g,%.17g,%.17g\n" % (
                    c.lambda2, c.q, c.regime, int(c.coex13), int(c.coex23),
                    "" if c.inv2 is None else int(c.inv2),
                    "" if c.inv1 is None else int(c.inv1),
                    c.x3, c.n3_star, c.ntilde3))

    @staticmethod
    def write_legend(path) -> None:
        with open(path, "w") as fh:
            json.dump(REGIME_COLORS, fh, indent=2)
            fh.write("\n")


def sweep(base_params: ModelParams, lambda2_range=(1.2, 4.0), q_range=(0.01, 0.99),
          resolution=(400, 400)) -> RegimeGrid:
    """Classify every cell of the (lambda2, q) grid. Cells are independent;
    assembly order is row-major and deterministic.

    The per-parameter fitness-ordering warning is suppressed here (grids may
    legitimately cross lambda2 <= mu1); the cell diagnostics carry the facts.
    """
    import warnings

    n_l, n_q = resolution
    lambda2_values = np.linspace(lambda2_range[0], lambda2_range[1], n_l)
    q_values = np.linspace(q_range[0], q_range[1], n_q)
    grid = RegimeGrid(base_params=base_params, lambda2_values=lambda2_values,
                      q_values=q_values)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for l2 in lambda2_values:
            for q in q_values:
                grid.cells.append(
                    classify(base_params.with_updates(lambda2=float(l2), q=float(q))))
    return grid
