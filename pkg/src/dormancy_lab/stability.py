"""Analytic Jacobians, a self-contained dense eigensolver for real matrices
up to 6x6 (balance + Hessenberg + Francis double-shift QR, closed forms for
n <= 3 as fallback), stability classification, and bifurcation sweeps in the
burst size m.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equilibria import (
    NoCoexistence,
    boundary_equilibrium_6d,
    dormancy_virus_equilibrium,
    host_virus_equilibrium,
    lv_equilibria,
)
from .model import ModelParams

NONHYPERBOLIC_TOL = 1e-9


# ---------------------------------------------------------------------------
# Analytic Jacobians
# ---------------------------------------------------------------------------

def jacobian6(params: ModelParams, state) -> np.ndarray:
    p = params
    n1a, n1i, n2a, n2d, n2i, n3 = np.asarray(state, dtype=float)
    tot = n1a + n1i + n2a + n2d + n2i
    rv = p.r + p.v
    km = p.kappa * p.mu1 + p.sigma
    J = np.zeros((6, 6))
    J[0, 0] = p.lambda1 - p.mu1 - p.C * tot - p.D * n3 - p.C * n1a
    J[0, 1] = -p.C * n1a + p.r
    J[0, 2] = J[0, 3] = J[0, 4] = -p.C * n1a
    J[0, 5] = -p.D * n1a
    J[1, 0] = p.D * n3
    J[1, 1] = -rv
    J[1, 5] = p.D * n1a
    J[2, 0] = J[2, 1] = -p.C * n2a
    J[2, 2] = p.lambda2 - p.mu1 - p.C * tot - p.D * n3 - p.C * n2a
    J[2, 3] = -p.C * n2a + p.sigma
    J[2, 4] = -p.C * n2a + p.r
    J[2, 5] = -p.D * n2a
    J[3, 2] = p.q * p.D * n3
    J[3, 3] = -km
    J[3, 5] = p.q * p.D * n2a
    J[4, 2] = (1.0 - p.q) * p.D * n3
    J[4, 4] = -rv
    J[4, 5] = (1.0 - p.q) * p.D * n2a
    J[5, 0] = -p.D * n3
    J[5, 1] = p.m * p.v
    J[5, 2] = -(1.0 - p.q) * p.D * n3
    J[5, 4] = p.m * p.v
    J[5, 5] = -p.D * n1a - (1.0 - p.q) * p.D * n2a - p.mu3
    return J


def jacobian4(params: ModelParams, state) -> np.ndarray:
    p = params
    n2a, n2d, n2i, n3 = np.asarray(state, dtype=float)
    rv = p.r + p.v
    km = p.kappa * p.mu1 + p.sigma
    J = np.zeros((4, 4))
    J[0, 0] = p.lambda2 - p.mu1 - p.C * (n2a + n2d + n2i) - p.D * n3 - p.C * n2a
    J[0, 1] = -p.C * n2a + p.sigma
    J[0, 2] = -p.C * n2a + p.r
    J[0, 3] = -p.D * n2a
    J[1, 0] = p.q * p.D * n3
    J[1, 1] = -km
    J[1, 3] = p.q * p.D * n2a
    J[2, 0] = (1.0 - p.q) * p.D * n3
    J[2, 2] = -rv
    J[2, 3] = (1.0 - p.q) * p.D * n2a
    J[3, 0] = -(1.0 - p.q) * p.D * n3
    J[3, 2] = p.m * p.v
    J[3, 3] = -(1.0 - p.q) * p.D * n2a - p.mu3
    return J


def jacobian3(params: ModelParams, state) -> np.ndarray:
    p = params
    n1a, n1i, n3 = np.asarray(state, dtype=float)
    rv = p.r + p.v
    J = np.zeros((3, 3))
    J[0, 0] = p.lambda1 - p.mu1 - p.C * (n1a + n1i) - p.D * n3 - p.C * n1a
    J[0, 1] = -p.C * n1a + p.r
    J[0, 2] = -p.D * n1a
    J[1, 0] = p.D * n3
    J[1, 1] = -rv
    J[1, 2] = p.D * n1a
    J[2, 0] = -p.D * n3
    J[2, 1] = p.m * p.v
    J[2, 2] = -p.D * n1a - p.mu3
    return J


def jacobian2(params: ModelParams, state) -> np.ndarray:
    p = params
    n1a, n2a = np.asarray(state, dtype=float)
    return np.array([
        [p.lambda1 - p.mu1 - p.C * (2 * n1a + n2a), -p.C * n1a],
        [-p.C * n2a, p.lambda2 - p.mu1 - p.C * (n1a + 2 * n2a)],
    ])


def matrix_A(params: ModelParams, n_star=None) -> np.ndarray:
    """The 3x3 invader block of jacobian6 at the host-virus boundary
    equilibrium, acting on (2a, 2d, 2i)."""
    p = params
    if n_star is None:
        n_star = host_virus_equilibrium(p)
    n1a, n1i, n3 = n_star
    return np.array([
        [p.lambda2 - p.mu1 - p.C * (n1a + n1i) - p.D * n3, p.sigma, p.r],
        [p.q * p.D * n3, -(p.kappa * p.mu1 + p.sigma), 0.0],
        [(1.0 - p.q) * p.D * n3, 0.0, -(p.r + p.v)],
    ])


def det_A_closed_form(params: ModelParams, n_star=None) -> float:
    p = params
    if n_star is None:
        n_star = host_virus_equilibrium(p)
    n3 = n_star[2]
    return ((p.lambda2 - p.lambda1) * (p.r + p.v) * (p.kappa * p.mu1 + p.sigma)
            + p.q * p.D * n3 * (p.v * p.sigma - p.r * p.kappa * p.mu1))


def matrix_F(params: ModelParams, n_tilde=None) -> np.ndarray:
    """The 2x2 invader block of jacobian6 at the dormancy-host boundary
    equilibrium, acting on (1a, 1i)."""
    p = params
    if n_tilde is None:
        n_tilde = dormancy_virus_equilibrium(p)
    t2a, t2d, t2i, t3 = n_tilde
    t2 = t2a + t2d + t2i
    return np.array([
        [p.lambda1 - p.mu1 - p.C * t2 - p.D * t3, p.r],
        [p.D * t3, -(p.r + p.v)],
    ])


def det_F_closed_form(params: ModelParams, n_tilde=None) -> float:
    p = params
    if n_tilde is None:
        n_tilde = dormancy_virus_equilibrium(p)
    t3 = n_tilde[3]
    return ((p.lambda2 - p.lambda1) * (p.r + p.v)
            + p.q * p.D * t3 * (p.v * p.sigma - p.r * p.kappa * p.mu1)
            / (p.kappa * p.mu1 + p.sigma))


# ---------------------------------------------------------------------------
# Dense eigensolver (self-contained)
# ---------------------------------------------------------------------------

class EigenConvergenceError(RuntimeError):
    pass


def _balance(a: np.ndarray) -> np.ndarray:
    """Parlett-Reinsch balancing with radix-2 scaling (similarity transform)."""
    a = a.copy()
    n = a.shape[0]
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            r = sum(abs(a[i, j]) for j in range(n) if j != i)
            c = sum(abs(a[j, i]) for j in range(n) if j != i)
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    a[i, :] *= g
                    a[:, i] *= f
    return a


def _hessenberg(a: np.ndarray) -> np.ndarray:
    """Householder similarity reduction to upper Hessenberg form."""
    h = a.copy()
    n = h.shape[0]
    for k in range(1, n - 1):
        x = h[k:, k - 1].copy()
        alpha = -math.copysign(np.linalg.norm(x), x[0] if x[0] != 0 else 1.0)
        if alpha == 0.0:
            continue
        u = x.copy()
        u[0] -= alpha
        unorm = np.linalg.norm(u)
        if unorm == 0.0:
            continue
        u /= unorm
        # H = I - 2 u u^T applied from both sides
        h[k:, :] -= 2.0 * np.outer(u, u @ h[k:, :])
        h[:, k:] -= 2.0 * np.outer(h[:, k:] @ u, u)
        h[k + 1:, k - 1] = 0.0
    return h


def _hqr_eigenvalues(h: np.ndarray, max_iter: int = 60) -> np.ndarray:
    """Francis double-shift QR with deflation on an upper Hessenberg matrix.

    Returns the n eigenvalues. Raises EigenConvergenceError if a 1x1/2x2
    block fails to deflate within max_iter sweeps.
    """
    h = h.copy()
    n = h.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = np.sum(np.abs(h))
    nn = n - 1
    t = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(h[l - 1, l - 1]) + abs(h[l, l])
                if s == 0.0:
                    s = anorm
                if abs(h[l, l - 1]) + s == s:
                    h[l, l - 1] = 0.0
                    break
                l -= 1
            x = h[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = h[nn - 1, nn - 1]
            w = h[nn, nn - 1] * h[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn] = z
                    wi[nn - 1] = -z
                nn -= 2
                break
            if its == max_iter:
                raise EigenConvergenceError(
                    f"QR iteration failed to deflate after {max_iter} sweeps")
            if its and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    h[i, i] -= x
                s = abs(h[nn, nn - 1]) + abs(h[nn - 1, nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            m = nn - 2
            while m >= l:
                z = h[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / h[m + 1, m] + h[m, m + 1]
                q = h[m + 1, m + 1] - z - r - s
                r = h[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(h[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(h[m - 1, m - 1]) + abs(z) + abs(h[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                h[i, i - 2] = 0.0
                if i != m + 2:
                    h[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = h[k, k - 1]
                    q = h[k + 1, k - 1]
                    r = h[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        h[k, k - 1] = -h[k, k - 1]
                else:
                    h[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = h[k, j] + q * h[k + 1, j]
                    if k != nn - 1:
                        p += r * h[k + 2, j]
                        h[k + 2, j] -= p * z
                    h[k + 1, j] -= p * y
                    h[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * h[i, k] + y * h[i, k + 1]
                    if k != nn - 1:
                        p += z * h[i, k + 2]
                        h[i, k + 2] -= p * r
                    h[i, k + 1] -= p * q
                    h[i, k] -= p
    return wr + 1j * wi


def _eig_quadratic(a: np.ndarray) -> np.ndarray:
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = tr * tr - 4.0 * det
    s = cmath.sqrt(disc)
    return np.array([(tr + s) / 2.0, (tr - s) / 2.0])


def _eig_cubic(a: np.ndarray) -> np.ndarray:
    """Roots of the characteristic polynomial of a 3x3 via Cardano; the
    three-real-roots branch uses the trigonometric form."""
    c2 = -(a[0, 0] + a[1, 1] + a[2, 2])
    c1 = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
          + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
          + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
    c0 = -_det3(a)
    # depressed cubic y^3 + p y + q with x = y - c2/3
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    shift = -c2 / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc <= 0.0:
        # three real roots
        rho = math.sqrt(max(-(p / 3.0) ** 3, 0.0))
        if rho == 0.0:
            roots = [0.0, 0.0, 0.0]
        else:
            theta = math.acos(min(1.0, max(-1.0, -q / (2.0 * rho))))
            rcbrt = 2.0 * math.sqrt(-p / 3.0)
            roots = [rcbrt * math.cos((theta + 2.0 * math.pi * k) / 3.0) for k in range(3)]
        return np.array([r + shift for r in roots], dtype=complex)
    sq = math.sqrt(disc)
    u = math.copysign(abs(-q / 2.0 + sq) ** (1.0 / 3.0), -q / 2.0 + sq)
    v = math.copysign(abs(-q / 2.0 - sq) ** (1.0 / 3.0), -q / 2.0 - sq)
    y1 = u + v
    re = -y1 / 2.0
    im = (u - v) * math.sqrt(3.0) / 2.0
    return np.array([y1 + shift, complex(re + shift, im), complex(re + shift, -im)])


def _det3(a: np.ndarray) -> float:
    return (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))


def _solve_complex(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting, complex, for n <= 6."""
    n = a.shape[0]
    m = a.astype(complex).copy()
    x = b.astype(complex).copy()
    for col in range(n):
        piv = col + int(np.argmax(np.abs(m[col:, col])))
        if abs(m[piv, col]) == 0.0:
            m[piv, col] = 1e-300
        if piv != col:
            m[[col, piv]] = m[[piv, col]]
            x[[col, piv]] = x[[piv, col]]
        for row in range(col + 1, n):
            f = m[row, col] / m[col, col]
            m[row, col:] -= f * m[col, col:]
            x[row] -= f * x[col]
    for col in range(n - 1, -1, -1):
        x[col] = (x[col] - m[col, col + 1:] @ x[col + 1:]) / m[col, col]
    return x


def eigen_residuals(matrix: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """||M v - lambda v|| / ||v|| per eigenvalue, with v recovered by inverse
    iteration at a slightly shifted eigenvalue."""
    n = matrix.shape[0]
    scale = max(1.0, float(np.max(np.abs(matrix))))
    out = np.empty(len(eigenvalues))
    ident = np.eye(n)
    for idx, lam in enumerate(eigenvalues):
        shift = lam + scale * 1e-11 * (1.0 + 1.0j)
        v = np.ones(n, dtype=complex) / math.sqrt(n)
        for _ in range(3):
            v = _solve_complex(matrix - shift * ident, v)
            v = v / np.linalg.norm(v)
        out[idx] = float(np.linalg.norm(matrix @ v - lam * v))
    return out


def eigenvalues(matrix, residual_check: bool = True) -> np.ndarray:
    """All eigenvalues of a real square matrix (n <= 6), sorted by descending
    real part (ties by descending imaginary part).

    Balance -> Hessenberg -> Francis QR; closed-form characteristic roots for
    n <= 3 serve as the fallback if the iteration ever failed to deflate.
    With residual_check, recomputed eigenvectors must satisfy
    ||M v - lambda v||/||v|| < 1e-9.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n > 6:
        raise ValueError("eigensolver is specified for n <= 6")
    if n == 0:
        return np.array([], dtype=complex)
    if n == 1:
        return np.array([complex(a[0, 0])])
    try:
        vals = _hqr_eigenvalues(_hessenberg(_balance(a)))
    except EigenConvergenceError:
        if n == 2:
            vals = _eig_quadratic(a)
        elif n == 3:
            vals = _eig_cubic(a)
        else:
            raise
    order = np.lexsort((-vals.imag, -vals.real))
    vals = vals[order]
    if residual_check:
        res = eigen_residuals(a, vals)
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(res) > 1e-9 * scale:
            raise EigenConvergenceError(
                f"eigen residual {np.max(res):.3e} exceeds tolerance")
    return vals


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    classification: str            # hyperbolically-stable | hyperbolically-unstable | non-hyperbolic
    n_real_negative: int
    n_real_positive: int
    n_complex_pairs: int
    max_residual: float

    def to_dict(self) -> dict:
        return {
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "classification": self.classification,
            "n_real_negative": self.n_real_negative,
            "n_real_positive": self.n_real_positive,
            "n_complex_pairs": self.n_complex_pairs,
            "max_residual": float(self.max_residual),
        }


def spectrum_report(matrix, tol: float = NONHYPERBOLIC_TOL) -> SpectrumReport:
    a = np.asarray(matrix, dtype=float)
    vals = eigenvalues(a)
    res = eigen_residuals(a, vals)
    re = vals.real
    if np.any(np.abs(re) < tol):
        cls = "non-hyperbolic"
    elif np.all(re < 0):
        cls = "hyperbolically-stable"
    else:
        cls = "hyperbolically-unstable"
    is_complex = np.abs(vals.imag) > tol
    return SpectrumReport(
        matrix=a,
        eigenvalues=vals,
        classification=cls,
        n_real_negative=int(np.sum(~is_complex & (re < 0))),
        n_real_positive=int(np.sum(~is_complex & (re > 0))),
        n_complex_pairs=int(np.sum(is_complex)) // 2,
        max_residual=float(np.max(res)),
    )


_SUBSYSTEM_JACOBIAN = {
    "lv1": (jacobian2, lambda p: np.array(lv_equilibria(p)) * np.array([1.0, 0.0])),
    "lv2": (jacobian2, lambda p: np.array(lv_equilibria(p)) * np.array([0.0, 1.0])),
    "n_star": (jacobian3, lambda p: np.array(host_virus_equilibrium(p))),
    "n_tilde": (jacobian4, lambda p: np.array(dormancy_virus_equilibrium(p))),
}


@dataclass
class EquilibriumClassification:
    which: str
    point: np.ndarray              # six-type embedding
    full: SpectrumReport           # jacobian6 spectrum
    subsystem: Optional[SpectrumReport]   # own-subsystem spectrum (boundary equilibria)
    block_spectrum_error: Optional[float]  # max matched-eigenvalue distance, full vs block union

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "point": [float(v) for v in self.point],
            "full": self.full.to_dict(),
            "subsystem": None if self.subsystem is None else self.subsystem.to_dict(),
            "block_spectrum_error": self.block_spectrum_error,
        }


def _matched_spectrum_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Greedy bipartite match of two equal-length spectra; max pair distance."""
    rem = list(b)
    worst = 0.0
    for z in a:
        dists = [abs(z - w) for w in rem]
        k = int(np.argmin(dists))
        worst = max(worst, dists[k])
        rem.pop(k)
    return worst


def classify_equilibrium(params: ModelParams, which: str) -> EquilibriumClassification:
    """Spectrum and stability of a named equilibrium ('lv1', 'lv2', 'n_star',
    'n_tilde', 'x') in the full six-type system; boundary equilibria also get
    their own-subsystem spectrum and the block-decomposition cross-check
    (union of invader-block and subsystem spectra vs the 6x6 spectrum)."""
    point = boundary_equilibrium_6d(which, params)
    full = spectrum_report(jacobian6(params, point))
    sub = None
    block_err = None
    if which in _SUBSYSTEM_JACOBIAN:
        jac, eq = _SUBSYSTEM_JACOBIAN[which]
        sub_point = eq(params)
        sub = spectrum_report(jac(params, sub_point))
        if which == "n_star":
            block = matrix_A(params)
        elif which == "n_tilde":
            block = matrix_F(params)
        else:
            block = None
        if block is not None:
            union = np.concatenate([sub.eigenvalues, eigenvalues(block)])
            block_err = float(_matched_spectrum_distance(full.eigenvalues, union))
    return EquilibriumClassification(
        which=which, point=point, full=full, subsystem=sub,
        block_spectrum_error=block_err)


# ---------------------------------------------------------------------------
# Bifurcation sweep in m
# ---------------------------------------------------------------------------

@dataclass
class BifurcationRow:
    m: float
    exists: bool
    max_re: float                  # NaN when the equilibrium does not exist
    max_complex_re: float          # NaN when the spectrum is all-real
    classification: str


@dataclass
class BifurcationReport:
    target: str                    # n_star | n_tilde
    m_star: float                  # transcritical point, closed form
    m_hopf: Optional[float]        # first complex-pair zero crossing, or None
    rows: list = field(default_factory=list)
    m_is_integer_model: bool = True   # stochastic model uses integer m; sweep treats m as real

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("m,exists,max_re,classification\n")
            for row in self.rows:
                fh.write(f"{row.m:.17g},{int(row.exists)},{row.max_re:.17g},{row.classification}\n")


def _params_with_real_m(params: ModelParams, m: float) -> ModelParams:
    """Copy with real-valued burst size for ODE-only sweeps (skips the
    integer-m validation that the stochastic model requires)."""
    p = object.__new__(ModelParams)
    for key in params.to_dict():
        object.__setattr__(p, key, getattr(params, key))
    object.__setattr__(p, "m", float(m))
    return p


def _sweep_point(params: ModelParams, m: float, target: str):
    p = _params_with_real_m(params, m)
    try:
        if target == "n_star":
            eq = host_virus_equilibrium(p)
            J = jacobian3(p, eq)
        else:
            eq = dormancy_virus_equilibrium(p)
            J = jacobian4(p, eq)
    except NoCoexistence:
        return BifurcationRow(m, False, math.nan, math.nan, "no-equilibrium")
    rep = spectrum_report(J)
    vals = rep.eigenvalues
    cplx = vals[np.abs(vals.imag) > NONHYPERBOLIC_TOL]
    max_cre = float(np.max(cplx.real)) if cplx.size else math.nan
    return BifurcationRow(m, True, float(np.max(vals.real)), max_cre, rep.classification)


def transcritical_m(params: ModelParams, target: str = "n_star") -> float:
    """Closed-form m where the monoculture level meets the coexistence
    threshold (bar_n = n_active*); onset of the virus epidemic."""
    p = params
    bar_n1a, bar_n2a = lv_equilibria(p)
    if target == "n_star":
        return (p.r + p.v) * (1.0 + p.mu3 / (p.D * bar_n1a)) / p.v
    return (p.r + p.v) * (1.0 + p.mu3 / ((1.0 - p.q) * p.D * bar_n2a)) / p.v


def bifurcation_sweep(params: ModelParams, m_values, target: str = "n_star") -> BifurcationReport:
    """Per-m existence and stability of the target equilibrium; locates the
    transcritical point in closed form and brackets + bisects the first Hopf
    crossing (complex-pair real part through zero) to 1e-6 in m."""
    m_values = sorted(float(m) for m in m_values)
    if not m_values:
        raise ValueError("m_range must be nonempty")
    if target not in ("n_star", "n_tilde"):
        raise ValueError("target must be n_star or n_tilde")
    rows = [_sweep_point(params, m, target) for m in m_values]
    m_star = transcritical_m(params, target)

    m_hopf = None
    prev = None
    for row in rows:
        if prev is not None and row.exists and prev.exists \
                and not math.isnan(prev.max_complex_re) and not math.isnan(row.max_complex_re) \
                and prev.max_complex_re < 0.0 <= row.max_complex_re:
            lo, hi = prev.m, row.m
            while hi - lo > 1e-6:
                mid = 0.5 * (lo + hi)
                g = _sweep_point(params, mid, target).max_complex_re
                if math.isnan(g) or g < 0.0:
                    lo = mid
                else:
                    hi = mid
            m_hopf = 0.5 * (lo + hi)
            break
        prev = row
    return BifurcationReport(target=target, m_star=m_star, m_hopf=m_hopf, rows=rows)
