import json

import numpy as np
import pytest

from dormancy_lab import (
    classify,
    classify_equilibrium,
    coexistence_equilibrium,
    invasion_conditions,
    sweep,
)
from dormancy_lab.regimes import REGIME_COLORS, RegimeGrid

from conftest import FIG7_BASE, FIG9_BASE, PROBES, fig7, fig9, random_params


def test_fig7_probe_classifications():
    expected = {
        "darkgreen": "DarkGreenCoex",
        "blue": "Blue",
        "purple": "Purple",
        "lightgreen": "LightGreenCoex",
        "red": "Red",
    }
    for name, (l2, q) in PROBES.items():
        cell = classify(fig7(lambda2=l2, q=q))
        assert cell.regime == expected[name], f"{name}: got {cell.regime}"


def test_fig9_founder_probes():
    assert classify(fig9(lambda2=3.2, q=0.6)).regime == "FounderControlCoex23"
    assert classify(fig9(lambda2=3.2, q=0.8)).regime == "FounderControlNoCoex23"


def test_no_founder_control_when_dormancy_pays(rng):
    """lambda2 > lambda1 with r kappa mu1 < v sigma: theta* > 0 > lambda1 -
    lambda2, so the type-2 invasion condition holds automatically and founder
    control is impossible."""
    checked = 0
    while checked < 300:
        p = random_params(rng)
        if p.r * p.kappa * p.mu1 >= p.v * p.sigma:
            continue
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = p.with_updates(lambda2=p.lambda1 + 0.2)
        cell = classify(p)
        assert not cell.regime.startswith("FounderControl")
        if cell.regime not in ("NoEpidemic", "Critical"):
            assert cell.inv2 is True
        checked += 1


def test_single_cell_grid_equals_classify():
    grid = sweep(fig7(), lambda2_range=(2.55, 2.55), q_range=(0.6, 0.6),
                 resolution=(1, 1))
    assert len(grid.cells) == 1
    assert grid.cells[0] == classify(fig7())


def test_fig7_sweep_structure():
    grid = sweep(fig7(), resolution=(48, 48))
    present = grid.regimes_present()
    assert {"Red", "Purple", "DarkGreenCoex", "LightGreenCoex", "Blue", "Orange"} <= present
    assert not any(r.startswith("FounderControl") for r in present)
    assert "NoEpidemic" not in present
    # the type-2 fixation regime extends strictly below lambda2 = lambda1
    blue_below = [c for c in grid.cells if c.regime == "Blue" and c.lambda2 < 3.15]
    assert blue_below


def test_fig9_sweep_replaces_coexistence_with_founder_control():
    grid = sweep(fig9(), resolution=(40, 40))
    present = grid.regimes_present()
    assert "DarkGreenCoex" not in present
    assert "LightGreenCoex" not in present
    assert "FounderControlCoex23" in present
    assert "FounderControlNoCoex23" in present


def test_condition_equivalence_on_cells():
    """Where the coexistence point exists: inv2 <=> x3 < n3* and (given
    type-2/virus coexistence) inv1 <=> x3 > ~n3."""
    grid = sweep(fig7(), resolution=(30, 30))
    for cell in grid.cells:
        if cell.regime in ("NoEpidemic", "Critical") or np.isnan(cell.x3):
            continue
        assert cell.inv2 == (cell.x3 < cell.n3_star)
        if cell.coex23:
            assert cell.inv1 == (cell.x3 > cell.ntilde3)


def test_coexistence_cells_have_positive_x():
    grid = sweep(fig7(), resolution=(30, 30))
    for cell in grid.cells:
        if cell.regime in ("DarkGreenCoex", "LightGreenCoex"):
            assert cell.x_positive
        elif cell.regime in ("Blue", "Purple", "Red"):
            assert not cell.x_positive


def test_founder_cells_have_positive_unstable_x():
    for q in (0.6, 0.8):
        p = fig9(q=q)
        cell = classify(p)
        assert cell.regime.startswith("FounderControl")
        assert cell.x_positive
        cls = classify_equilibrium(p, "x")
        assert cls.full.classification == "hyperbolically-unstable"


def test_csv_and_legend(tmp_path):
    grid = sweep(fig7(), resolution=(5, 5))
    grid.to_csv(tmp_path / "regimes.csv")
    RegimeGrid.write_legend(tmp_path / "legend.json")
    lines = (tmp_path / "regimes.csv").read_text().strip().splitlines()
    assert lines[0] == "lambda2,q,regime,coex13,coex23,inv2,inv1,x3,n3_star,ntilde3"
    assert len(lines) == 26
    legend = json.loads((tmp_path / "legend.json").read_text())
    assert legend["DarkGreenCoex"] == "dark green"
    assert set(REGIME_COLORS.values()) >= {"red", "purple", "dark green",
                                           "light green", "blue", "orange"}
