"""Numba-compiled hot loops: exact SSA core, linear branching-process core,
and an embedded Runge-Kutta 5(4) integrator for the built-in systems.

All randomness comes from an explicit xoshiro256++ state seeded through
splitmix64, so every run is a pure function of its 64-bit seed. Replica
streams are derived with `stream_seed`, never from global RNG state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_MASK = U64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = U64(0x9E3779B97F4A7C15)
_DOUBLE_ULP = 1.1102230246251565e-16  # 2^-53

# SSA termination reasons
REASON_ABSORBING = 0
REASON_T_MAX = 1
REASON_EVENT_CAP = 2
REASON_STOP_HIT = 3

# Integrator statuses
ODE_COMPLETED = 0
ODE_CONVERGED = 1
ODE_STEP_UNDERFLOW = 2


@njit(cache=True, nogil=True)
def splitmix64(x):
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)) & _MASK
    z = ((z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)) & _MASK
    return z ^ (z >> U64(31))


@njit(cache=True, nogil=True)
def stream_seed(base_seed, replica):
    """Independent replica stream: splitmix jump from the base seed."""
    return splitmix64((U64(base_seed) + _GOLDEN * (U64(replica) + U64(1))) & _MASK)


@njit(cache=True, nogil=True)
def _rng_init(seed, state):
    s = U64(seed)
    for i in range(4):
        s = splitmix64(s)
        state[i] = s


@njit(cache=True, nogil=True)
def _rng_next(state):
    """xoshiro256++ next value."""
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    res = (s0 + s3) & _MASK
    res = (((res << U64(23)) | (res >> U64(41))) + s0) & _MASK
    t = (s1 << U64(17)) & _MASK
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = ((s3 << U64(45)) | (s3 >> U64(19))) & _MASK
    state[0], state[1], state[2], state[3] = s0, s1, s2, s3
    return res


@njit(cache=True, nogil=True)
def _u01_open(state):
    """Uniform on (0, 1]; safe under log()."""
    return float((_rng_next(state) >> U64(11)) + U64(1)) * _DOUBLE_ULP


@njit(cache=True, nogil=True)
def _u01_half(state):
    """Uniform on [0, 1)."""
    return float(_rng_next(state) >> U64(11)) * _DOUBLE_ULP


@njit(cache=True, nogil=True)
def _masked_sum(n, mask):
    s = 0
    for i in range(6):
        if mask & (1 << i):
            s += n[i]
    return s


@njit(cache=True, nogil=True)
def _ssa_rates(p, n, rates):
    """The 14 channel rates; p = (lam1, lam2, mu1, C, D, q, r, v, sigma, kappa, mu3, K)."""
    lam1, lam2, mu1, C, D, q, r, v, sigma, kappa, mu3, K = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11])
    n1 = n[0] + n[1]
    n2 = n[2] + n[3] + n[4]
    comp = mu1 + C / K * (n1 + n2)
    contact = D / K
    rates[0] = lam1 * n[0]
    rates[1] = comp * n[0]
    rates[2] = contact * n[0] * n[5]
    rates[3] = r * n[1]
    rates[4] = v * n[1]
    rates[5] = lam2 * n[2]
    rates[6] = comp * n[2]
    rates[7] = (1.0 - q) * contact * n[2] * n[5]
    rates[8] = q * contact * n[2] * n[5]
    rates[9] = r * n[4]
    rates[10] = v * n[4]
    rates[11] = sigma * n[3]
    rates[12] = kappa * mu1 * n[3]
    rates[13] = mu3 * n[5]
    tot = 0.0
    for i in range(14):
        tot += rates[i]
    return tot


@njit(cache=True, nogil=True)
def _apply_channel(n, ch, m):
    if ch == 0:
        n[0] += 1
    elif ch == 1:
        n[0] -= 1
    elif ch == 2:
        n[0] -= 1; n[1] += 1; n[5] -= 1
    elif ch == 3:
        n[0] += 1; n[1] -= 1
    elif ch == 4:
        n[1] -= 1; n[5] += m
    elif ch == 5:
        n[2] += 1
    elif ch == 6:
        n[2] -= 1
    elif ch == 7:
        n[2] -= 1; n[4] += 1; n[5] -= 1
    elif ch == 8:
        n[2] -= 1; n[3] += 1
    elif ch == 9:
        n[2] += 1; n[4] -= 1
    elif ch == 10:
        n[4] -= 1; n[5] += m
    elif ch == 11:
        n[2] += 1; n[3] -= 1
    elif ch == 12:
        n[3] -= 1
    else:
        n[5] -= 1


@njit(cache=True, nogil=True)
def _check_stops(t, n, hits, halts,
                 beta_level, ext_masks, eps_masks, eps_levels,
                 nb_centers, nb_deltas, nb_extmasks,
                 band_center, band_mask, band_halfwidth):
    """Evaluate every not-yet-hit stopping predicate at the current state.

    Slot layout in `hits`: [0] T_beta, then extinction sets, then eps targets,
    then neighborhood targets, last slot the resident-band exit. Returns True
    if a halting stop fired.
    """
    halted = False
    slot = 0
    if beta_level > 0.0 and np.isnan(hits[slot]):
        ok = True
        for i in range(6):
            if not n[i] > beta_level:
                ok = False
                break
        if ok:
            hits[slot] = t
            if halts[slot]:
                halted = True
    slot += 1
    for j in range(ext_masks.shape[0]):
        if np.isnan(hits[slot]):
            if _masked_sum(n, ext_masks[j]) == 0:
                hits[slot] = t
                if halts[slot]:
                    halted = True
        slot += 1
    for j in range(eps_masks.shape[0]):
        if np.isnan(hits[slot]):
            if _masked_sum(n, eps_masks[j]) == eps_levels[j]:
                hits[slot] = t
                if halts[slot]:
                    halted = True
        slot += 1
    for j in range(nb_centers.shape[0]):
        if np.isnan(hits[slot]):
            inside = True
            for i in range(6):
                if abs(n[i] - nb_centers[j, i]) > nb_deltas[j]:
                    inside = False
                    break
            if inside and nb_extmasks[j] != 0:
                if _masked_sum(n, nb_extmasks[j]) != 0:
                    inside = False
            if inside:
                hits[slot] = t
                if halts[slot]:
                    halted = True
        slot += 1
    if band_halfwidth > 0.0 and np.isnan(hits[slot]):
        outside = False
        for i in range(6):
            if band_mask & (1 << i):
                if abs(n[i] - band_center[i]) > band_halfwidth:
                    outside = True
                    break
        if outside:
            hits[slot] = t
            if halts[slot]:
                halted = True
    return halted


@njit(cache=True, nogil=True)
def ssa_core(p, m, n, seed, t_max, event_cap,
             rec_stride, rec_t, rec_n,
             beta_level, ext_masks, eps_masks, eps_levels,
             nb_centers, nb_deltas, nb_extmasks,
             band_center, band_mask, band_halfwidth,
             hits, halts):
    """Gillespie direct method over the 14 channels, with stop instrumentation.

    Mutates `n` (the running state) and fills `hits` (NaN = not hit) plus the
    optional record buffers. Thresholds and centers are in absolute counts
    (already scaled by K). Returns (reason, t_final, events_used, n_rec).
    """
    state = np.empty(4, dtype=np.uint64)
    _rng_init(seed, state)
    rates = np.empty(14, dtype=np.float64)
    t = 0.0
    events = 0
    rec_i = 0
    max_rec = rec_t.shape[0]
    next_rec = 0.0
    recording = rec_stride > 0.0 and max_rec > 0

    halted = _check_stops(t, n, hits, halts, beta_level, ext_masks, eps_masks,
                          eps_levels, nb_centers, nb_deltas, nb_extmasks,
                          band_center, band_mask, band_halfwidth)
    if halted:
        if recording and rec_i < max_rec:
            rec_t[rec_i] = t
            for i in range(6):
                rec_n[rec_i, i] = n[i]
            rec_i += 1
        return REASON_STOP_HIT, t, events, rec_i

    while True:
        tot = _ssa_rates(p, n, rates)
        if tot == 0.0:
            # absorbing: the path is constant from here on
            if recording:
                while next_rec <= t_max and rec_i < max_rec:
                    rec_t[rec_i] = next_rec
                    for i in range(6):
                        rec_n[rec_i, i] = n[i]
                    rec_i += 1
                    next_rec += rec_stride
            return REASON_ABSORBING, t, events, rec_i
        dt = -np.log(_u01_open(state)) / tot
        t_new = t + dt
        if t_new > t_max:
            if recording:
                while next_rec <= t_max and rec_i < max_rec:
                    rec_t[rec_i] = next_rec
                    for i in range(6):
                        rec_n[rec_i, i] = n[i]
                    rec_i += 1
                    next_rec += rec_stride
            return REASON_T_MAX, t_max, events, rec_i
        if recording:
            while next_rec < t_new and rec_i < max_rec:
                rec_t[rec_i] = next_rec
                for i in range(6):
                    rec_n[rec_i, i] = n[i]
                rec_i += 1
                next_rec += rec_stride
        x = _u01_half(state) * tot
        acc = 0.0
        ch = -1
        for i in range(14):
            acc += rates[i]
            if x < acc:
                ch = i
                break
        if ch < 0:
            # cumulative rounding left x past the top: take the last live channel
            ch = 13
            while ch > 0 and rates[ch] == 0.0:
                ch -= 1
        _apply_channel(n, ch, m)
        t = t_new
        events += 1
        halted = _check_stops(t, n, hits, halts, beta_level, ext_masks, eps_masks,
                              eps_levels, nb_centers, nb_deltas, nb_extmasks,
                              band_center, band_mask, band_halfwidth)
        if halted:
            return REASON_STOP_HIT, t, events, rec_i
        if events >= event_cap:
            return REASON_EVENT_CAP, t, events, rec_i


# ---------------------------------------------------------------------------
# Linear multi-type branching process (frozen resident environment)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def bp_run(coeffs, which, deltas, z, seed, t_max, survive_cutoff, event_cap,
           rec_stride, rec_t, rec_z):
    """Simulate one linear branching process exactly.

    coeffs[c] is the per-capita rate of channel c, which[c] the type index it
    scales with, deltas[c] the state change. Mutates `z`. Stops at extinction,
    at total population >= survive_cutoff (a.s. survival proxy, cutoff <= 0
    disables), at t_max, or at event_cap. Returns (outcome, t, events, n_rec)
    with outcome 0=extinct, 1=cutoff reached, 2=t_max, 3=event_cap.
    """
    ntypes = z.shape[0]
    nch = coeffs.shape[0]
    state = np.empty(4, dtype=np.uint64)
    _rng_init(seed, state)
    rates = np.empty(nch, dtype=np.float64)
    t = 0.0
    events = 0
    rec_i = 0
    max_rec = rec_t.shape[0]
    next_rec = 0.0
    recording = rec_stride > 0.0 and max_rec > 0
    while True:
        total_pop = 0
        for i in range(ntypes):
            total_pop += z[i]
        if total_pop == 0:
            if recording and rec_i < max_rec:
                rec_t[rec_i] = t
                for i in range(ntypes):
                    rec_z[rec_i, i] = 0
                rec_i += 1
            return 0, t, events, rec_i
        if survive_cutoff > 0 and total_pop >= survive_cutoff:
            return 1, t, events, rec_i
        tot = 0.0
        for c in range(nch):
            rates[c] = coeffs[c] * z[which[c]]
            tot += rates[c]
        if tot == 0.0:
            return 2, t, events, rec_i
        dt = -np.log(_u01_open(state)) / tot
        t_new = t + dt
        if t_new > t_max:
            return 2, t_max, events, rec_i
        if recording:
            while next_rec < t_new and rec_i < max_rec:
                rec_t[rec_i] = next_rec
                for i in range(ntypes):
                    rec_z[rec_i, i] = z[i]
                rec_i += 1
                next_rec += rec_stride
        x = _u01_half(state) * tot
        acc = 0.0
        ch = -1
        for c in range(nch):
            acc += rates[c]
            if x < acc:
                ch = c
                break
        if ch < 0:
            ch = nch - 1
            while ch > 0 and rates[ch] == 0.0:
                ch -= 1
        for i in range(ntypes):
            z[i] += deltas[ch, i]
        t = t_new
        events += 1
        if events >= event_cap:
            return 3, t, events, rec_i


@njit(cache=True, nogil=True)
def bp_extinction_batch(coeffs, which, deltas, init, n_replicas, base_seed,
                        survive_cutoff, t_max, event_cap):
    """Extinction frequency over independent replicas; returns counts
    (extinct, survived, undecided)."""
    ntypes = init.shape[0]
    extinct = 0
    survived = 0
    undecided = 0
    empty_t = np.empty(0, dtype=np.float64)
    empty_z = np.empty((0, ntypes), dtype=np.int64)
    z = np.empty(ntypes, dtype=np.int64)
    for rep in range(n_replicas):
        for i in range(ntypes):
            z[i] = init[i]
        seed = stream_seed(base_seed, rep)
        outcome, _, _, _ = bp_run(coeffs, which, deltas, z, seed, t_max,
                                  survive_cutoff, event_cap, 0.0, empty_t, empty_z)
        if outcome == 0:
            extinct += 1
        elif outcome == 1:
            survived += 1
        else:
            undecided += 1
    return extinct, survived, undecided


# ---------------------------------------------------------------------------
# Embedded Runge-Kutta 5(4) (Dormand-Prince) for the built-in systems
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def rhs_builtin(sys_id, p, m, y, out):
    """Right-hand sides of the rescaled deterministic systems.

    sys_id 6: full six-type system on (n1a, n1i, n2a, n2d, n2i, n3);
    sys_id 4: dormancy-host + virus subsystem on (n2a, n2d, n2i, n3);
    sys_id 3: plain host + virus subsystem on (n1a, n1i, n3);
    sys_id 2: two-species logistic competition on (n1a, n2a).
    """
    lam1, lam2, mu1, C, D, q, r, v, sigma, kappa, mu3 = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10])
    mv = m * v
    if sys_id == 6:
        n1a, n1i, n2a, n2d, n2i, n3 = y[0], y[1], y[2], y[3], y[4], y[5]
        tot = n1a + n1i + n2a + n2d + n2i
        out[0] = n1a * (lam1 - mu1 - C * tot - D * n3) + r * n1i
        out[1] = D * n3 * n1a - (r + v) * n1i
        out[2] = n2a * (lam2 - mu1 - C * tot - D * n3) + r * n2i + sigma * n2d
        out[3] = q * D * n3 * n2a - (kappa * mu1 + sigma) * n2d
        out[4] = (1.0 - q) * D * n3 * n2a - (r + v) * n2i
        out[5] = -D * n3 * n1a - (1.0 - q) * D * n3 * n2a + mv * (n1i + n2i) - mu3 * n3
    elif sys_id == 4:
        n2a, n2d, n2i, n3 = y[0], y[1], y[2], y[3]
        out[0] = n2a * (lam2 - mu1 - C * (n2a + n2i + n2d) - D * n3) + sigma * n2d + r * n2i
        out[1] = q * D * n2a * n3 - (kappa * mu1 + sigma) * n2d
        out[2] = (1.0 - q) * D * n2a * n3 - (r + v) * n2i
        out[3] = mv * n2i - (1.0 - q) * D * n2a * n3 - mu3 * n3
    elif sys_id == 3:
        n1a, n1i, n3 = y[0], y[1], y[2]
        out[0] = n1a * (lam1 - mu1 - C * (n1a + n1i) - D * n3) + r * n1i
        out[1] = D * n1a * n3 - (r + v) * n1i
        out[2] = mv * n1i - D * n1a * n3 - mu3 * n3
    else:
        n1a, n2a = y[0], y[1]
        out[0] = n1a * (lam1 - mu1 - C * (n1a + n2a))
        out[1] = n2a * (lam2 - mu1 - C * (n1a + n2a))


@njit(cache=True, nogil=True)
def integrate_core(sys_id, p, m, y, t0, t_end, rtol, atol,
                   h_init, h_min, h_max, rec_stride, rec_t, rec_y,
                   stop_on_converged, conv_tol):
    """Adaptive Dormand-Prince 5(4) with cubic-Hermite dense output.

    Mutates `y` to the final state. Tiny negative overshoot (> -1e-12) is
    clamped to 0 after each accepted step; the nonnegative orthant is forward
    invariant for these systems so larger negatives indicate misuse.
    Returns (status, t_final, n_steps, n_rec).
    """
    dim = y.shape[0]
    k1 = np.empty(dim); k2 = np.empty(dim); k3 = np.empty(dim)
    k4 = np.empty(dim); k5 = np.empty(dim); k6 = np.empty(dim)
    k7 = np.empty(dim)
    ytmp = np.empty(dim); ynew = np.empty(dim); yerr = np.empty(dim)
    t = t0
    h = h_init
    n_steps = 0
    rec_i = 0
    max_rec = rec_t.shape[0]
    recording = rec_stride > 0.0 and max_rec > 0
    next_rec = t0
    if recording and rec_i < max_rec:
        rec_t[rec_i] = t
        for i in range(dim):
            rec_y[rec_i, i] = y[i]
        rec_i += 1
        next_rec = t0 + rec_stride

    rhs_builtin(sys_id, p, m, y, k1)
    while t < t_end:
        if h > h_max:
            h = h_max
        if h < h_min:
            h = h_min
        if t + h > t_end:
            h = t_end - t

        for i in range(dim):
            ytmp[i] = y[i] + h * 0.2 * k1[i]
        rhs_builtin(sys_id, p, m, ytmp, k2)
        for i in range(dim):
            ytmp[i] = y[i] + h * (0.075 * k1[i] + 0.225 * k2[i])
        rhs_builtin(sys_id, p, m, ytmp, k3)
        for i in range(dim):
            ytmp[i] = y[i] + h * ((44.0 / 45.0) * k1[i] - (56.0 / 15.0) * k2[i] + (32.0 / 9.0) * k3[i])
        rhs_builtin(sys_id, p, m, ytmp, k4)
        for i in range(dim):
            ytmp[i] = y[i] + h * ((19372.0 / 6561.0) * k1[i] - (25360.0 / 2187.0) * k2[i]
                                  + (64448.0 / 6561.0) * k3[i] - (212.0 / 729.0) * k4[i])
        rhs_builtin(sys_id, p, m, ytmp, k5)
        for i in range(dim):
            ytmp[i] = y[i] + h * ((9017.0 / 3168.0) * k1[i] - (355.0 / 33.0) * k2[i]
                                  + (46732.0 / 5247.0) * k3[i] + (49.0 / 176.0) * k4[i]
                                  - (5103.0 / 18656.0) * k5[i])
        rhs_builtin(sys_id, p, m, ytmp, k6)
        for i in range(dim):
            ynew[i] = y[i] + h * ((35.0 / 384.0) * k1[i] + (500.0 / 1113.0) * k3[i]
                                  + (125.0 / 192.0) * k4[i] - (2187.0 / 6784.0) * k5[i]
                                  + (11.0 / 84.0) * k6[i])
        rhs_builtin(sys_id, p, m, ynew, k7)
        # embedded 4th-order error estimate
        err = 0.0
        for i in range(dim):
            e = h * ((71.0 / 57600.0) * k1[i] - (71.0 / 16695.0) * k3[i]
                     + (71.0 / 1920.0) * k4[i] - (17253.0 / 339200.0) * k5[i]
                     + (22.0 / 525.0) * k6[i] - (1.0 / 40.0) * k7[i])
            ay = abs(y[i])
            an = abs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            e = e / sc
            err += e * e
        err = np.sqrt(err / dim)

        if err <= 1.0:
            # accept; dense output by cubic Hermite on [t, t+h]
            if recording:
                while next_rec <= t + h and rec_i < max_rec:
                    s = (next_rec - t) / h
                    h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s)
                    h10 = s * (1.0 - s) * (1.0 - s)
                    h01 = s * s * (3.0 - 2.0 * s)
                    h11 = s * s * (s - 1.0)
                    rec_t[rec_i] = next_rec
                    for i in range(dim):
                        rec_y[rec_i, i] = (h00 * y[i] + h10 * h * k1[i]
                                           + h01 * ynew[i] + h11 * h * k7[i])
                    rec_i += 1
                    next_rec += rec_stride
            t = t + h
            for i in range(dim):
                yi = ynew[i]
                if yi < 0.0 and yi > -1e-12:
                    yi = 0.0
                y[i] = yi
            rhs_builtin(sys_id, p, m, y, k1)
            n_steps += 1
            if stop_on_converged:
                sup = 0.0
                for i in range(dim):
                    a = abs(k1[i])
                    if a > sup:
                        sup = a
                if sup < conv_tol:
                    return ODE_CONVERGED, t, n_steps, rec_i
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * err ** -0.2
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            h = h * fac
        else:
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            hnew = h * fac
            if hnew < h_min:
                return ODE_STEP_UNDERFLOW, t, n_steps, rec_i
            h = hnew
    return ODE_COMPLETED, t, n_steps, rec_i
