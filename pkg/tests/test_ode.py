import numpy as np
import pytest

from dormancy_lab import (
    IntegratorConfig,
    coexistence_equilibrium,
    dormancy_virus_equilibrium,
    host_virus_equilibrium,
    integrate,
    lv_equilibria,
    rhs2,
    rhs3,
    rhs4,
    rhs6,
)
from dormancy_lab.ode import integrate_callable

from conftest import fig7, random_params


def test_equilibria_are_rhs_zeros(fig7_probe):
    p = fig7_probe
    n1a, n1i, n3 = host_virus_equilibrium(p)
    t2a, t2d, t2i, t3 = dormancy_virus_equilibrium(p)
    x = coexistence_equilibrium(p).x
    bar1, bar2 = lv_equilibria(p)
    assert np.max(np.abs(rhs6(p, [n1a, n1i, 0, 0, 0, n3]))) < 1e-10
    assert np.max(np.abs(rhs6(p, [0, 0, t2a, t2d, t2i, t3]))) < 1e-10
    assert np.max(np.abs(rhs6(p, x))) < 1e-10
    assert np.max(np.abs(rhs6(p, [bar1, 0, 0, 0, 0, 0]))) < 1e-12
    assert np.max(np.abs(rhs3(p, [n1a, n1i, n3]))) < 1e-10
    assert np.max(np.abs(rhs4(p, [t2a, t2d, t2i, t3]))) < 1e-10
    assert np.all(rhs2(p, [bar1, 0.0]) == 0.0)


def test_type2_faces_are_invariant(rng):
    for _ in range(50):
        p = random_params(rng)
        state = rng.uniform(0, 3, size=6)
        state[2] = state[3] = state[4] = 0.0
        f = rhs6(p, state)
        assert f[2] == 0.0 and f[3] == 0.0 and f[4] == 0.0


def test_rhs6_embeds_rhs3_and_rhs4(rng):
    for _ in range(200):
        p = random_params(rng)
        a, b, c = rng.uniform(0, 4, size=3)
        f6 = rhs6(p, [a, b, 0, 0, 0, c])
        f3 = rhs3(p, [a, b, c])
        np.testing.assert_allclose(f6[[0, 1, 5]], f3, rtol=1e-14, atol=1e-14)
        w, x, y, z = rng.uniform(0, 4, size=4)
        f6 = rhs6(p, [0, 0, w, x, y, z])
        f4 = rhs4(p, [w, x, y, z])
        np.testing.assert_allclose(f6[[2, 3, 4, 5]], f4, rtol=1e-14, atol=1e-14)


def test_integrate_zero_state_stays_zero():
    p = fig7()
    res = integrate(p, np.zeros(6), IntegratorConfig(t_end=50.0), record_stride=5.0)
    assert res.status == "completed"
    assert np.all(res.states == 0.0)
    assert np.all(res.final_state == 0.0)


def test_probe_trajectories_converge_to_coexistence(fig7_probe):
    """Both near-boundary initializations end at the interior point."""
    p = fig7_probe
    n1a, n1i, n3 = host_virus_equilibrium(p)
    t2a, t2d, t2i, t3 = dormancy_virus_equilibrium(p)
    x = coexistence_equilibrium(p).x
    cfg = IntegratorConfig(t_end=500.0)
    res_a = integrate(p, [n1a, n1i, 1e-3, 0, 0, n3], cfg)
    res_b = integrate(p, [1e-3, 0, t2a, t2d, t2i, t3], cfg)
    assert np.max(np.abs(res_a.final_state - x)) < 1e-4
    assert np.max(np.abs(res_b.final_state - x)) < 1e-4


def test_integrator_self_convergence(fig7_probe):
    """Halving rel_tol moves the t=100 endpoint by less than 1e-6."""
    p = fig7_probe
    n1a, n1i, n3 = host_virus_equilibrium(p)
    init = [n1a, n1i, 1e-3, 0, 0, n3]
    r1 = integrate(p, init, IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10, t_end=100.0))
    r2 = integrate(p, init, IntegratorConfig(rel_tol=5e-11, abs_tol=1e-10, t_end=100.0))
    assert np.max(np.abs(r1.final_state - r2.final_state)) < 1e-6


def test_forward_invariance(rng):
    for _ in range(10):
        p = random_params(rng)
        init = rng.uniform(0, 2, size=6)
        res = integrate(p, init, IntegratorConfig(t_end=30.0), record_stride=0.5)
        assert np.all(res.states >= 0.0)
        assert np.all(res.final_state >= 0.0)


def test_convergence_detection(fig7_probe):
    # the 1e-10 declaration threshold needs an integrator error floor below
    # it, hence the tightened tolerances
    p = fig7_probe
    n1a, n1i, n3 = host_virus_equilibrium(p)
    res = integrate(p, [n1a, n1i, 1e-3, 0, 0, n3],
                    IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12, t_end=1e4),
                    stop_on_converged=True, convergence_tol=1e-10)
    assert res.status == "converged"
    assert res.t_final < 1e4
    x = coexistence_equilibrium(p).x
    assert np.max(np.abs(res.final_state - x)) < 1e-6


def test_callable_integrator_matches_compiled(fig7_probe):
    p = fig7_probe
    n1a, n1i, n3 = host_virus_equilibrium(p)
    init = [n1a, n1i, 1e-3, 0, 0, n3]
    cfg = IntegratorConfig(t_end=50.0)
    fast = integrate(p, init, cfg)
    slow = integrate_callable(lambda y: rhs6(p, y), init, cfg)
    assert np.max(np.abs(fast.final_state - slow.final_state)) < 1e-8


def test_record_grid(fig7_probe):
    p = fig7_probe
    n1a, n1i, n3 = host_virus_equilibrium(p)
    res = integrate(p, [n1a, n1i, 1e-3, 0, 0, n3], IntegratorConfig(t_end=10.0),
                    record_stride=1.0)
    np.testing.assert_allclose(res.times, np.arange(11.0), atol=1e-12)
    assert res.states.shape == (11, 6)
    # dense output consistent with a direct integration to an interior time
    mid = integrate(p, [n1a, n1i, 1e-3, 0, 0, n3], IntegratorConfig(t_end=5.0))
    assert np.max(np.abs(res.states[5] - mid.final_state)) < 1e-7
