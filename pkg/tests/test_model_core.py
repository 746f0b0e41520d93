import json
import math

import numpy as np
import pytest

from dormancy_lab import ModelParams, PopulationState, TransitionKind, enumerate_transitions, total_rate
from dormancy_lab.model import ConfigError, transition_deltas, transition_rates

from conftest import fig7, random_params


def hand_rates(p: ModelParams, n: PopulationState):
    """Independent transcription of the 14 rate formulas, kept deliberately
    separate from the implementation (the hand-sum oracle)."""
    n1 = n.n1a + n.n1i
    n2 = n.n2a + n.n2d + n.n2i
    return [
        p.lambda1 * n.n1a,
        (p.mu1 + p.C / p.K * (n1 + n2)) * n.n1a,
        p.D / p.K * n.n1a * n.n3,
        p.r * n.n1i,
        p.v * n.n1i,
        p.lambda2 * n.n2a,
        (p.mu1 + p.C / p.K * (n1 + n2)) * n.n2a,
        (1 - p.q) * p.D / p.K * n.n2a * n.n3,
        p.q * p.D / p.K * n.n2a * n.n3,
        p.r * n.n2i,
        p.v * n.n2i,
        p.sigma * n.n2d,
        p.kappa * p.mu1 * n.n2d,
        p.mu3 * n.n3,
    ]


def test_all_zero_state_is_absorbing():
    p = fig7()
    trans = enumerate_transitions(p, PopulationState.zero())
    assert len(trans) == 14
    assert all(t.rate == 0.0 for t in trans)
    assert total_rate(p, PopulationState.zero()) == 0.0


def test_lone_virion_only_degrades():
    p = fig7()
    state = PopulationState(0, 0, 0, 0, 0, 1)
    trans = enumerate_transitions(p, state)
    active = [t for t in trans if t.rate > 0]
    assert len(active) == 1
    assert active[0].kind is TransitionKind.DEGRADATION_3
    assert active[0].rate == p.mu3
    assert total_rate(p, state) == p.mu3


def test_two_residents_hand_sum():
    p = fig7(K=1)
    state = PopulationState(2, 0, 0, 0, 0, 0)
    rates = transition_rates(p, state)
    assert rates[0] == pytest.approx(6.3, abs=0)         # 3.15 * 2
    assert rates[1] == pytest.approx(6.0, abs=0)         # (1 + 1*2) * 2
    assert np.all(rates[2:] == 0.0)
    assert total_rate(p, state) == pytest.approx(12.3, rel=1e-15)


def test_rates_match_hand_oracle_on_random_states(rng):
    for _ in range(200):
        p = random_params(rng, K=int(rng.integers(1, 500)))
        state = PopulationState(*[int(x) for x in rng.integers(0, 50, size=6)])
        expected = hand_rates(p, state)
        got = transition_rates(p, state)
        np.testing.assert_allclose(got, expected, rtol=1e-15)
        assert total_rate(p, state) == pytest.approx(float(np.sum(got)), rel=1e-15)


def test_enumerate_returns_14_distinct_kinds():
    p = fig7()
    trans = enumerate_transitions(p, PopulationState(3, 2, 5, 1, 2, 7))
    assert [t.kind for t in trans] == list(TransitionKind)
    assert len({t.kind for t in trans}) == 14


def test_positive_rate_transitions_keep_counts_nonnegative(rng):
    """Random 1e4-step walk via the transition catalogue never goes negative."""
    p = fig7(K=50)
    state = PopulationState(10, 3, 8, 2, 1, 40)
    arr = state.as_array()
    deltas = transition_deltas(p.m)
    for _ in range(10_000):
        rates = transition_rates(p, PopulationState.from_array(arr))
        tot = rates.sum()
        if tot == 0:
            break
        ch = rng.choice(14, p=rates / tot)
        arr = arr + deltas[ch]
        assert np.all(arr >= 0)


def test_q_zero_freezes_dormancy_channels(rng):
    p = fig7(q=0.0)
    arr = PopulationState(10, 3, 12, 0, 2, 30).as_array()
    deltas = transition_deltas(p.m)
    for _ in range(5000):
        rates = transition_rates(p, PopulationState.from_array(arr))
        assert rates[8] == 0.0    # dormancy entry
        assert rates[11] == 0.0   # resuscitation
        assert rates[12] == 0.0   # dormant death
        tot = rates.sum()
        if tot == 0:
            break
        arr = arr + deltas[rng.choice(14, p=rates / tot)]


def test_q_zero_type2_mirrors_type1_structure():
    """With q = 0 the type-2 channels have the same form as type 1 with birth
    rate lambda2 (same per-capita coefficients channel by channel)."""
    p = fig7(q=0.0)
    s = PopulationState(7, 4, 7, 0, 4, 11)
    rates = transition_rates(p, s)
    assert rates[6] == rates[1]            # identical competition death
    assert rates[7] == rates[2]            # infection at full contact rate
    assert rates[9] == rates[3]            # recovery
    assert rates[10] == rates[4]           # lysis
    assert rates[5] == pytest.approx(p.lambda2 / p.lambda1 * rates[0], rel=1e-12)


def test_d_zero_virions_decay(rng):
    p = fig7(D=0.0)
    arr = PopulationState(10, 0, 12, 0, 0, 30).as_array()
    deltas = transition_deltas(p.m)
    last_n3 = arr[5]
    for _ in range(3000):
        rates = transition_rates(p, PopulationState.from_array(arr))
        assert rates[2] == rates[7] == rates[8] == 0.0
        tot = rates.sum()
        if tot == 0:
            break
        arr = arr + deltas[rng.choice(14, p=rates / tot)]
        assert arr[5] <= last_n3
        last_n3 = arr[5]


def test_delta_structure():
    deltas = transition_deltas(10)
    # virion jumps only -1 or +m, host jumps only +-1
    assert set(np.unique(deltas[:, 5])) <= {-1, 0, 10}
    assert set(np.unique(deltas[:, :5])) <= {-1, 0, 1}


def test_params_validation():
    with pytest.raises(ConfigError):
        fig7(q=1.5)
    with pytest.raises(ConfigError):
        fig7(D=-0.1)
    with pytest.raises(ConfigError):
        fig7(m=0)
    with pytest.raises(ConfigError):
        fig7(K=0.5)
    with pytest.warns(UserWarning):
        fig7(lambda2=0.5)   # violates mu1 < lambda2, warned not rejected


def test_population_state_validation():
    with pytest.raises(ValueError):
        PopulationState(-1, 0, 0, 0, 0, 0)
    s = PopulationState(1, 2, 3, 4, 5, 6)
    assert s.n1 == 3 and s.n2 == 12 and s.total == 21
    assert np.array_equal(s.as_array(), [1, 2, 3, 4, 5, 6])
    np.testing.assert_allclose(s.rescaled(10), [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])


def test_params_file_roundtrip(tmp_path):
    p = fig7()
    for name in ("p.json", "p.toml"):
        path = tmp_path / name
        p.to_file(path)
        assert ModelParams.from_file(path) == p


def test_params_file_rejects_unknown_and_missing(tmp_path):
    path = tmp_path / "bad.json"
    data = fig7().to_dict()
    data["extra"] = 1.0
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError, match="unknown"):
        ModelParams.from_file(path)
    data = fig7().to_dict()
    del data["mu3"]
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError, match="mu3"):
        ModelParams.from_file(path)
