"""Deterministic (per-capacity rescaled) dynamics: right-hand sides of the
six-, four-, three- and two-dimensional systems and an adaptive RK5(4)
integrator.

States are nonnegative float vectors in rescaled units (counts / K). The
nonnegative orthant is forward invariant; the integrator clamps tiny negative
overshoot to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ModelParams


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    h_init: float = 1e-4
    h_min: float = 1e-13
    h_max: float = 1.0
    t_end: float = 100.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.h_min <= self.h_init <= self.h_max:
            raise ValueError("step bounds must satisfy h_min <= h_init <= h_max")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")


@dataclass
class OdeResult:
    times: np.ndarray
    states: np.ndarray
    final_state: np.ndarray
    t_final: float
    status: str           # completed | converged | step_underflow
    n_steps: int


def rhs6(params: ModelParams, state) -> np.ndarray:
    """Six-type system on (n1a, n1i, n2a, n2d, n2i, n3)."""
    y = np.asarray(state, dtype=np.float64)
    out = np.empty(6)
    _kernels.rhs_builtin(6, params.rate_vector(), params.m, y, out)
    return out


def rhs4(params: ModelParams, state) -> np.ndarray:
    """Dormancy-host-plus-virus subsystem on (n2a, n2d, n2i, n3)."""
    y = np.asarray(state, dtype=np.float64)
    out = np.empty(4)
    _kernels.rhs_builtin(4, params.rate_vector(), params.m, y, out)
    return out


def rhs3(params: ModelParams, state) -> np.ndarray:
    """Plain host-plus-virus subsystem on (n1a, n1i, n3)."""
    y = np.asarray(state, dtype=np.float64)
    out = np.empty(3)
    _kernels.rhs_builtin(3, params.rate_vector(), params.m, y, out)
    return out


def rhs2(params: ModelParams, state) -> np.ndarray:
    """Two-species logistic competition on (n1a, n2a)."""
    y = np.asarray(state, dtype=np.float64)
    out = np.empty(2)
    _kernels.rhs_builtin(2, params.rate_vector(), params.m, y, out)
    return out


_SYSTEM_DIMS = {6: 6, 4: 4, 3: 3, 2: 2}
_STATUS = {
    _kernels.ODE_COMPLETED: "completed",
    _kernels.ODE_CONVERGED: "converged",
    _kernels.ODE_STEP_UNDERFLOW: "step_underflow",
}


def integrate(params: ModelParams, initial, cfg: IntegratorConfig = IntegratorConfig(),
              system: int = 6, record_stride: float = 0.0,
              stop_on_converged: bool = False, convergence_tol: float = 1e-10) -> OdeResult:
    """Integrate one of the built-in systems from `initial` to cfg.t_end.

    record_stride > 0 samples the trajectory on a uniform grid (dense output
    between accepted steps); 0 keeps only the endpoint. With
    stop_on_converged, the run ends early once ||rhs||_inf < convergence_tol.
    Deterministic given inputs.
    """
    if system not in _SYSTEM_DIMS:
        raise ValueError(f"system must be one of {sorted(_SYSTEM_DIMS)}, got {system}")
    dim = _SYSTEM_DIMS[system]
    y = np.array(initial, dtype=np.float64).copy()
    if y.shape != (dim,):
        raise ValueError(f"initial state must have shape ({dim},), got {y.shape}")
    if np.any(y < 0):
        raise ValueError("initial state must be nonnegative")
    if record_stride > 0:
        max_rec = int(np.floor(cfg.t_end / record_stride)) + 2
    else:
        max_rec = 0
    rec_t = np.empty(max_rec, dtype=np.float64)
    rec_y = np.empty((max_rec, dim), dtype=np.float64)
    status, t_final, n_steps, n_rec = _kernels.integrate_core(
        system, params.rate_vector(), params.m, y, 0.0, cfg.t_end,
        cfg.rel_tol, cfg.abs_tol, cfg.h_init, cfg.h_min, cfg.h_max,
        record_stride, rec_t, rec_y, stop_on_converged, convergence_tol)
    return OdeResult(
        times=rec_t[:n_rec].copy(),
        states=rec_y[:n_rec].copy(),
        final_state=y,
        t_final=float(t_final),
        status=_STATUS[int(status)],
        n_steps=int(n_steps),
    )


def integrate_callable(rhs, initial, cfg: IntegratorConfig = IntegratorConfig(),
                       record_stride: float = 0.0) -> OdeResult:
    """Same RK5(4) scheme for an arbitrary Python rhs(t-free) callable.

    Slow path for ad-hoc systems; the built-in systems go through the
    compiled integrate().
    """
    y = np.array(initial, dtype=np.float64)
    t = 0.0
    h = cfg.h_init
    times = [0.0]
    states = [y.copy()]
    next_rec = record_stride if record_stride > 0 else np.inf
    n_steps = 0
    k1 = np.asarray(rhs(y), dtype=np.float64)
    A = [
        (0.2,),
        (0.075, 0.225),
        (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
        (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
        (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    ]
    B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
    E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
    status = "completed"
    while t < cfg.t_end:
        h = min(max(h, cfg.h_min), cfg.h_max, cfg.t_end - t)
        ks = [k1]
        for row in A:
            ytmp = y + h * sum(c * k for c, k in zip(row, ks))
            ks.append(np.asarray(rhs(ytmp), dtype=np.float64))
        ynew = y + h * sum(b * k for b, k in zip(B5, ks))
        k7 = np.asarray(rhs(ynew), dtype=np.float64)
        ks.append(k7)
        errvec = h * sum(e * k for e, k in zip(E, ks))
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(ynew))
        err = float(np.sqrt(np.mean((errvec / scale) ** 2)))
        if err <= 1.0:
            if record_stride > 0:
                while next_rec <= t + h:
                    s = (next_rec - t) / h
                    h00 = (1 + 2 * s) * (1 - s) ** 2
                    h10 = s * (1 - s) ** 2
                    h01 = s * s * (3 - 2 * s)
                    h11 = s * s * (s - 1)
                    times.append(next_rec)
                    states.append(h00 * y + h10 * h * k1 + h01 * ynew + h11 * h * k7)
                    next_rec += record_stride
            t += h
            y = ynew
            y[(y < 0) & (y > -1e-12)] = 0.0
            k1 = np.asarray(rhs(y), dtype=np.float64)
            n_steps += 1
            h *= 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            hnew = h * max(0.2, 0.9 * err ** -0.2)
            if hnew < cfg.h_min:
                status = "step_underflow"
                break
            h = hnew
    return OdeResult(times=np.array(times), states=np.array(states), final_state=y,
                     t_final=t, status=status, n_steps=n_steps)


def write_trajectory_csv(path, result: OdeResult, labels=None) -> None:
    """Trajectory CSV: time plus coordinates, 17 significant digits."""
    dim = result.states.shape[1] if result.states.size else len(result.final_state)
    if labels is None:
        labels = [f"y{i}" for i in range(dim)]
    with open(path, "w") as fh:
        fh.write("time," + ",".join(labels) + "\n")
        for t, row in zip(result.times, result.states):
            fh.write("%.17g" % t + "," + ",".join("%.17g" % x for x in row) + "\n")
