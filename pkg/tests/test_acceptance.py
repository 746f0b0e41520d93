"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Heavy Monte-Carlo criteria run at the replica counts needed for their stated
tolerances; everything is seeded, so results are reproducible bit for bit.
Criteria 3 (founder-probe spectral fine structure) and 6 (20% timescale gate)
assert exactly what is stated even though the measured system disagrees; see
the failure messages for the measured values.
"""

import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from dormancy_lab import (
    IntegratorConfig,
    InvasionExperiment,
    ModelParams,
    PopulationState,
    SsaConfig,
    bp_extinction_frequency,
    classify,
    classify_equilibrium,
    coexistence_equilibrium,
    dormancy_virus_equilibrium,
    eigenvalues,
    extinction_probs,
    host_virus_equilibrium,
    integrate,
    invasion_conditions,
    jacobian6,
    lv_equilibria,
    matrix_A,
    matrix_F,
    mean_matrix,
    mean_path,
    perron,
    rhs2,
    rhs3,
    rhs4,
    rhs6,
    run_invasion,
)
from dormancy_lab.equilibria import NoCoexistence
from dormancy_lab.invasion import wilson_interval
from dormancy_lab.stability import det_A_closed_form, eigen_residuals, jacobian3

from conftest import fig7, fig9, random_params


_REPORT_PATH = Path(__file__).resolve().parent.parent / "acceptance_report.txt"
_REPORT_STARTED = False


def report(criterion: str, ok: bool, detail: str) -> None:
    """One pass/fail line per criterion, printed and appended to the report
    artifact at the repo root (pytest's fd capture hides passing tests'
    stdout in -v logs)."""
    global _REPORT_STARTED
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, file=sys.__stdout__, flush=True)
    mode = "a" if _REPORT_STARTED else "w"
    with open(_REPORT_PATH, mode) as fh:
        fh.write(line + "\n")
    _REPORT_STARTED = True


def spectrum_structure(vals, tol=1e-9):
    is_cplx = np.abs(vals.imag) > tol
    return (int(np.sum(~is_cplx & (vals.real < 0))),
            int(np.sum(~is_cplx & (vals.real > 0))),
            int(np.sum(is_cplx)) // 2,
            bool(np.all(vals.real[is_cplx] < 0)))


# ---------------------------------------------------------------------------
# 1. equilibrium reproduction
# ---------------------------------------------------------------------------

def test_criterion_1_equilibrium_reproduction():
    t0 = time.time()
    p = fig7()
    n1a, n1i, n3 = host_virus_equilibrium(p)
    t2a, t2d, t2i, t3 = dormancy_virus_equilibrium(p)
    coex = coexistence_equilibrium(p)
    ok = True
    try:
        assert n1a == pytest.approx(0.25, abs=1e-12)
        assert n1i == pytest.approx(0.38, abs=1e-12)
        assert n3 == pytest.approx(6.08, abs=1e-12)
        assert t2a == pytest.approx(0.625, abs=1e-12)
        assert coex.x3 == pytest.approx(4.42105, abs=5e-6)
        assert t3 < coex.x3 < n3
        assert np.max(np.abs(rhs3(p, (n1a, n1i, n3)))) < 1e-10
        assert np.max(np.abs(rhs4(p, (t2a, t2d, t2i, t3)))) < 1e-10
        assert np.max(np.abs(rhs6(p, coex.x))) < 1e-10
        elapsed = time.time() - t0
        assert elapsed < 1.0
    except AssertionError:
        ok = False
        raise
    finally:
        report("1 (equilibria)", ok,
               f"n*=({n1a:.4g},{n1i:.4g},{n3:.4g}), ~n2a={t2a}, x3={coex.x3:.6f}, "
               f"runtime {time.time() - t0:.2f}s")


# ---------------------------------------------------------------------------
# 2. regime probes
# ---------------------------------------------------------------------------

def test_criterion_2_regime_probes():
    t0 = time.time()
    expected7 = {(2.55, 0.6): "DarkGreenCoex", (3.0, 0.2): "Blue",
                 (2.0, 0.4): "Purple", (2.2, 0.9): "LightGreenCoex",
                 (1.2, 0.4): "Red"}
    expected9 = {(3.2, 0.6): "FounderControlCoex23", (3.2, 0.8): "FounderControlNoCoex23"}
    got = {}
    ok = True
    try:
        for (l2, q), want in expected7.items():
            got[(l2, q)] = classify(fig7(lambda2=l2, q=q)).regime
            assert got[(l2, q)] == want, f"fig7 probe {(l2, q)}: {got[(l2, q)]} != {want}"
        for (l2, q), want in expected9.items():
            got[(l2, q)] = classify(fig9(lambda2=l2, q=q)).regime
            assert got[(l2, q)] == want, f"fig9 probe {(l2, q)}: {got[(l2, q)]} != {want}"
        assert time.time() - t0 < 1.0
    except AssertionError:
        ok = False
        raise
    finally:
        report("2 (regime probes)", ok, f"{len(got)}/7 probes checked, runtime {time.time() - t0:.2f}s")


# ---------------------------------------------------------------------------
# 3. spectral structure
# ---------------------------------------------------------------------------

def test_criterion_3a_dark_green_spectrum():
    p = fig7()
    x = coexistence_equilibrium(p).x
    J = jacobian6(p, x)
    vals = eigenvalues(J)
    res = eigen_residuals(J, vals)
    neg, pos, pairs, pairs_stable = spectrum_structure(vals)
    ok = (neg, pos, pairs, pairs_stable) == (4, 0, 1, True) and np.max(res) < 1e-9
    report("3a (dark-green x spectrum)", ok,
           f"{neg} real negative, {pos} real positive, {pairs} complex pair(s), "
           f"max residual {np.max(res):.1e}")
    assert ok


def test_criterion_3b_founder_probe_spectra():
    """Stated structure: exactly one positive real, three negative reals and
    one stable complex pair at both founder probes."""
    results = []
    for q in (0.6, 0.8):
        p = fig9(q=q)
        x = coexistence_equilibrium(p).x
        J = jacobian6(p, x)
        vals = eigenvalues(J)
        res = eigen_residuals(J, vals)
        neg, pos, pairs, pairs_stable = spectrum_structure(vals)
        results.append((q, neg, pos, pairs, pairs_stable, float(np.max(res))))
    ok = all(r[1:5] == (3, 1, 1, True) and r[5] < 1e-9 for r in results)
    detail = "; ".join(
        f"q={q}: {neg} real neg, {pos} real pos, {pairs} pair(s), resid {resid:.1e}"
        for q, neg, pos, pairs, _, resid in results)
    report("3b (founder x spectra)", ok, detail)
    assert ok, (
        "expected 3 negative reals + 1 positive real + 1 stable complex pair; "
        f"measured: {detail} (instability with exactly one positive eigenvalue "
        "does hold; the real/complex split differs at these exact probes)")


# ---------------------------------------------------------------------------
# 4. ODE convergence
# ---------------------------------------------------------------------------

def test_criterion_4_ode_convergence():
    t0 = time.time()
    cfg = IntegratorConfig(t_end=500.0)
    cases = []

    def add_cases(p, target6, include_ntilde_start=True, virus_free_start=False):
        ns = host_virus_equilibrium(p)
        cases.append((p, [ns[0], ns[1], 1e-3, 0, 0, ns[2]], target6))
        if include_ntilde_start:
            nt = dormancy_virus_equilibrium(p)
            cases.append((p, [1e-3, 0, nt[0], nt[1], nt[2], nt[3]], target6))
        if virus_free_start:
            bar2 = lv_equilibria(p)[1]
            cases.append((p, [1e-3, 0, bar2, 0, 0, 1e-3], target6))

    # mutual-invasion probe: both starts converge to the interior point
    p = fig7()
    add_cases(p, coexistence_equilibrium(p).x)
    # type-1 fixation probe
    p = fig7(lambda2=2.0, q=0.4)
    ns = host_virus_equilibrium(p)
    add_cases(p, np.array([ns[0], ns[1], 0, 0, 0, ns[2]]))
    # type-2 fixation probe
    p = fig7(lambda2=3.0, q=0.2)
    nt = dormancy_virus_equilibrium(p)
    add_cases(p, np.array([0, 0, nt[0], nt[1], nt[2], nt[3]]))
    # no-dormancy-coexistence probe (virus-free-ish second start)
    p = fig7(lambda2=1.2, q=0.4)
    ns = host_virus_equilibrium(p)
    add_cases(p, np.array([ns[0], ns[1], 0, 0, 0, ns[2]]),
              include_ntilde_start=False, virus_free_start=True)

    worst = 0.0
    ok = True
    try:
        for p, init, target in cases:
            res = integrate(p, init, cfg)
            dist = float(np.max(np.abs(res.final_state - np.asarray(target))))
            worst = max(worst, dist)
            assert dist < 1e-4, f"probe lambda2={p.lambda2}, q={p.q}: dist {dist:.2e}"
        elapsed = time.time() - t0
        assert elapsed < 10.0
    except AssertionError:
        ok = False
        raise
    finally:
        report("4 (ODE convergence)", ok,
               f"{len(cases)} trajectories, worst end distance {worst:.2e}, "
               f"runtime {time.time() - t0:.1f}s")


# ---------------------------------------------------------------------------
# 5. invasion probability vs branching limit
# ---------------------------------------------------------------------------

def test_criterion_5_invasion_probability():
    t0 = time.time()
    p = fig7()
    s = extinction_probs(p, "inv2")
    # independent cross-oracle: direct simulation of the branching process
    mc = bp_extinction_frequency(p, "inv2", n_replicas=1_000_000, base_seed=777)
    ok = True
    entry = None
    try:
        assert mc["undecided"] == 0
        assert abs(mc["extinction_frequency"] - s[0]) < 3 * mc["stderr"], (
            f"fixed point {s[0]:.6f} vs Monte Carlo {mc['extinction_frequency']:.6f} "
            f"+- {mc['stderr']:.6f}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            exp = InvasionExperiment(direction="inv2", params=p, K_list=(1000,),
                                     replicas=5000, base_seed=20250808)
            res = run_invasion(exp)
        entry = res.per_K[0]
        lo, hi = wilson_interval(entry["successes"], entry["replicas"], z=3.0)
        target = 1.0 - float(s[0])
        assert lo <= target <= hi, (
            f"empirical {entry['p_hat']:.4f} (3-sigma Wilson [{lo:.4f}, {hi:.4f}]) "
            f"vs theory {target:.4f}")
        elapsed = time.time() - t0
        assert elapsed < 600.0
    except AssertionError:
        ok = False
        raise
    finally:
        ssa_part = f"{entry['successes']}/5000" if entry is not None else "n/a"
        report("5 (invasion probability)", ok,
               f"MC extinction {mc['extinction_frequency']:.5f} vs fixed point {s[0]:.5f}; "
               f"SSA successes {ssa_part}, runtime {time.time() - t0:.0f}s")


# ---------------------------------------------------------------------------
# 6. timescale trend
# ---------------------------------------------------------------------------

def test_criterion_6_timescale_trend():
    t0 = time.time()
    p = fig7()
    lam, _ = perron(p, "inv2")
    inv_lam = 1.0 / lam
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        means = {}
        fail_medians = {}
        for K, reps in ((1_000, 2000), (10_000, 800), (100_000, 1100)):
            exp = InvasionExperiment(direction="inv2", params=p, K_list=(K,),
                                     replicas=reps, base_seed=606 + K)
            entry = run_invasion(exp).per_K[0]
            means[K] = entry["tbeta_over_logK"]["mean"]
            fail_medians[K] = entry["t0_over_logK_median"]
    gaps = [abs(means[K] - inv_lam) for K in (1_000, 10_000, 100_000)]
    trend_ok = gaps[0] > gaps[1] > gaps[2]
    rel_err = abs(means[100_000] - inv_lam) / inv_lam
    within_20 = rel_err < 0.20
    sublog_ok = fail_medians[100_000] < fail_medians[1_000]

    report("6 (timescale trend: monotone approach)", trend_ok,
           f"mean T_beta/logK = {means[1_000]:.2f}, {means[10_000]:.2f}, "
           f"{means[100_000]:.2f} -> 1/lambda* = {inv_lam:.2f}")
    report("6 (timescale trend: within 20% at K=1e5)", within_20,
           f"relative gap {rel_err:.1%}")
    report("6 (failure times sub-logarithmic)", sublog_ok,
           f"median T_0/logK: {fail_medians[1_000]:.3f} (K=1e3) -> "
           f"{fail_medians[100_000]:.3f} (K=1e5); runtime {time.time() - t0:.0f}s")
    assert trend_ok, "conditional mean T_beta/log K must approach 1/lambda* monotonely"
    assert sublog_ok
    assert within_20, (
        f"mean T_beta/logK at K=1e5 is {means[100_000]:.3f}, {rel_err:.1%} from "
        f"1/lambda* = {inv_lam:.3f} (structural offset log(beta)/(lambda* log K); "
        "the stated 20% needs K beyond desk scale)")


# ---------------------------------------------------------------------------
# 7. property suites
# ---------------------------------------------------------------------------

def test_criterion_7_property_suites():
    t0 = time.time()
    rng = np.random.default_rng(987654321)
    checked = {}

    def n_star_exists(p):
        try:
            host_virus_equilibrium(p)
            return True
        except NoCoexistence:
            return False

    def n_tilde_exists(p):
        try:
            dormancy_virus_equilibrium(p)
            return True
        except NoCoexistence:
            return False

    def det_cofactor3(a):
        return (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
                - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
                + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))

    # det A closed form + transpose identities + sign equivalence
    n = 0
    while n < 1000:
        p = random_params(rng, require=n_star_exists)
        A = matrix_A(p)
        assert det_cofactor3(A) == pytest.approx(det_A_closed_form(p), rel=1e-8, abs=1e-12)
        np.testing.assert_array_equal(mean_matrix(p, "inv2"), A.T)
        rep = invasion_conditions(p)
        if not rep.critical and abs(det_A_closed_form(p)) > 1e-12:
            assert (det_A_closed_form(p) > 0) == rep.inv2
        n += 1
    checked["det_A/J*=A^T/inv2<=>detA>0"] = n

    n = 0
    while n < 1000:
        p = random_params(rng, require=n_tilde_exists)
        nt = dormancy_virus_equilibrium(p)
        np.testing.assert_array_equal(mean_matrix(p, "inv1", nt), matrix_F(p, nt).T)
        # (1-q) ~n2a = n1a*
        n1a_star = host_virus_equilibrium(p)[0]
        assert (1 - p.q) * nt[0] == pytest.approx(n1a_star, rel=1e-14)
        n += 1
    checked["J~=F^T/(1-q)~n2a=n1a*"] = n

    # forbidden ordering and the infected-sum redundancy
    n = 0
    forbidden = 0
    while n < 10_000:
        p = random_params(rng)
        try:
            n3 = host_virus_equilibrium(p)[2]
            t3 = dormancy_virus_equilibrium(p)[3]
        except NoCoexistence:
            continue
        coex = coexistence_equilibrium(p)
        if coex.exists:
            if n3 < coex.x3 < t3:
                forbidden += 1
            expected = p.mu3 * coex.x3 / (p.m * p.v - (p.r + p.v))
            scale = max(1.0, abs(coex.x3))
            assert coex.x[1] + coex.x[4] == pytest.approx(expected, rel=1e-10,
                                                          abs=1e-10 * scale)
        n += 1
    assert forbidden == 0
    checked["ordering/xicond"] = n

    # fixed-point minimality and monotone iteration
    n = 0
    while n < 1000:
        p = random_params(rng, require=n_star_exists)
        trace = []
        s = extinction_probs(p, "inv2", monotone_trace=trace)
        arr = np.array(trace)
        assert np.all(np.diff(arr, axis=0) >= -1e-15)
        assert np.all((s > 0) & (s <= 1.0 + 1e-12))
        value, _ = perron(p, "inv2")
        if value > 1e-6:
            assert np.all(s < 1)
        elif value < -1e-6:
            assert np.all(np.abs(s - 1) < 1e-9)
        n += 1
    checked["fixed-point"] = n

    # analytic Jacobian vs finite differences
    n = 0
    while n < 1000:
        p = random_params(rng)
        y = rng.uniform(0.05, 3.0, size=6)
        J = jacobian6(p, y)
        J_fd = np.zeros((6, 6))
        for j in range(6):
            h = 1e-6 * (1.0 + abs(y[j]))
            e = np.zeros(6)
            e[j] = h
            J_fd[:, j] = (rhs6(p, y + e) - rhs6(p, y - e)) / (2 * h)
        assert np.max(np.abs(J - J_fd) / np.maximum(np.abs(J), 1.0)) < 1e-5
        n += 1
    checked["jacobian-fd"] = n

    elapsed = time.time() - t0
    ok = elapsed < 30.0
    report("7 (property suites)", ok,
           f"{sum(checked.values())} checks across {len(checked)} suites, "
           f"runtime {elapsed:.1f}s")
    assert ok, f"property suites took {elapsed:.1f}s (budget 30s)"


# ---------------------------------------------------------------------------
# 8. law of large numbers
# ---------------------------------------------------------------------------

def test_criterion_8_lln_mean_path():
    t0 = time.time()
    K = 100_000
    p = fig7(K=K)
    ns = host_virus_equilibrium(p)
    init = PopulationState(round(K * ns[0]), round(K * ns[1]), 1, 0, 0, round(K * ns[2]))
    cfg = SsaConfig(seed=11235, t_max=20.0, record_stride=0.5)
    times, mean, stderr = mean_path(p, init, cfg, replicas=50)
    ode = integrate(p, [ns[0], ns[1], 1.0 / K, 0, 0, ns[2]],
                    IntegratorConfig(t_end=20.0), record_stride=0.5)
    n_pts = min(len(times), len(ode.times))
    sup = float(np.max(np.abs(mean[:n_pts] - ode.states[:n_pts])))
    elapsed = time.time() - t0
    ok = sup < 0.05 and elapsed < 600.0
    report("8 (LLN mean path)", ok,
           f"sup-norm distance {sup:.4f} over t in [0,20] at K=1e5 (50 replicas), "
           f"runtime {elapsed:.0f}s")
    assert sup < 0.05
    assert elapsed < 600.0


# ---------------------------------------------------------------------------
# 9. conjecture evidence (non-blocking warnings on failure)
# ---------------------------------------------------------------------------

def test_criterion_9_conjecture_evidence():
    t0 = time.time()
    outcomes = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        # mutual-invasion probe: successes should settle at the interior point
        exp = InvasionExperiment(direction="inv2", params=fig7(), K_list=(10_000,),
                                 replicas=600, base_seed=1101, fate_mode=True)
        entry = run_invasion(exp).per_K[0]
        succ = max(entry["successes"], 1)
        frac_x = entry["fate_of_successes"]["x_nbhd"] / succ
        outcomes.append(("dark-green to x-neighborhood", frac_x, entry["successes"]))
        # type-2 fixation probe: successes should end with type 1 extinct near ~n
        exp = InvasionExperiment(direction="inv2", params=fig7(lambda2=3.0, q=0.2),
                                 K_list=(10_000,), replicas=1200, base_seed=2202,
                                 fate_mode=True)
        entry = run_invasion(exp).per_K[0]
        succ = max(entry["successes"], 1)
        frac_fix = entry["fate_of_successes"]["fix_ntilde"] / succ
        outcomes.append(("blue to type-2 fixation", frac_fix, entry["successes"]))

    elapsed = time.time() - t0
    all_ok = True
    for name, frac, successes in outcomes:
        ok = frac >= 0.95
        all_ok &= ok
        report(f"9 (conjecture evidence: {name})", ok,
               f"{frac:.1%} of {successes} successes (evidence for conjectured "
               "post-invasion behaviour, non-blocking)")
        if not ok:
            warnings.warn(
                f"conjecture-evidence check below 95%: {name} at {frac:.1%} "
                f"({successes} successes); this is evidence for a conjecture and "
                "does not block acceptance", stacklevel=1)
    report("9 (runtime)", elapsed < 600.0, f"runtime {elapsed:.0f}s")
    # failures are reported as warnings by construction; only runtime is hard
    assert elapsed < 600.0
