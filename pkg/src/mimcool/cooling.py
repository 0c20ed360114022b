"""Steady-state quadrature variances, effective phonon number and temperature.

Three independent routes to <dq^2> and <dp^2>:

* ``lyapunov``: solve A V + V A^T + D = 0 for the full covariance
  (authoritative);
* ``spectral``: integrate |chi(w)|^2 times the force-noise spectrum (position)
  and the resolvent spectrum (momentum) by adaptive quadrature;
* ``closed_form``: the rational-integral formulas built from the
  coefficient lists in :class:`ClosedFormCoefficients`.

The uncorrected closed forms and noise spectrum contain sign and normalization errors.
Each fix is a named entry of :data:`CORRECTIONS`; functions accept a
``corrections`` set so that any fix can be switched off to show its effect.
"""
from __future__ import annotations

import logging
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional

import numpy as np
from scipy.integrate import quad

from . import coupling
from .errors import MimcoolError, NearPole, QuadratureStall, SingularSystem, Unstable
from .params import CONSTANTS, SystemConfig, derive
from .steady_state import (FluctuationModel, LinearizedParams, SteadyState,
                           build_fluctuation_model, eigen_stability, linearize,
                           routh_hurwitz, stability_m1,
                           steady_state_at)

log = logging.getLogger(__name__)

CLAMP_FLOOR = -1e-9


@dataclass(frozen=True)
class Correction:
    name: str
    printed: str
    corrected: str
    # False when the printed form cannot be evaluated (undefined or garbled symbol)
    switchable: bool = True


CORRECTIONS = {c.name: c for c in (
    Correction("kc_token", "kc in d2, d3, d2'", "kappa", switchable=False),
    Correction("m2_gamma_sq", "gamma^2 in the Delta^2 coefficient of M2",
               "4 gamma^2 (M2 = Hurwitz determinant / 4 kappa gamma)"),
    Correction("m2_coupling_prefactor", "2 (kappa+gamma)^2 / (kappa gamma) in M2",
               "(kappa+gamma)^2 / (kappa gamma)"),
    Correction("n_block_denominator", "M2 in the N-block denominators",
               "the Hurwitz determinant 4 kappa gamma M2"),
    Correction("a4_undefined", "a4 used but never defined", "a4 = M1 = det A",
               switchable=False),
    Correction("d1_primed", "unprimed d1 inside N1'",
               "d1' = 2 (kappa^2 - Delta^2) + Gamma1^2"),
    Correction("optical_occupancy", "kappa N2 (vacuum optical input only)",
               "kappa (2 n_th + 1) N2"),
    Correction("noise_y_quadrature", "sqrt(2 kappa) X_in drives dY",
               "sqrt(2 kappa) Y_in drives dY (independent input quadrature)"),
    Correction("noise_q_bracket", "Delta C/D inside the q_in bracket",
               "Delta G_I C/D"),
    Correction("noise_q_normalization", "|...|^2 / Omega1 for the q_in term",
               "|...|^2 / Omega1^2"),
    Correction("chi_sign", "(Gamma2 + i w) in 1/chi", "(Gamma2 - i w)"),
    Correction("damping_w2_term", "-(kappa + gamma) G_I^2 w^2 in gamma_eff",
               "+(kappa - gamma) G_I^2 w^2"),
    Correction("b_s_factor", "b_s = G a_s / (w_m - i gamma)",
               "b_s from the phonon steady-state equation (G carries an extra factor 2)",
               switchable=False),
)}

ALL_CORRECTIONS: FrozenSet[str] = frozenset(CORRECTIONS)


@dataclass(frozen=True)
class ClosedFormCoefficients:
    a1: float
    a2: float
    a3: float
    a4: float
    b1: float
    b2: float
    b3: float
    c1: float
    c2: float
    c3: float
    d1: float
    d2: float
    d3: float
    bp2: float
    bp3: float
    cp1: float
    cp2: float
    cp3: float
    dp1: float
    dp2: float
    dp3: float
    delta3_sq: float
    delta3p_sq: float
    M1: float
    M2: float
    N1: float = float("nan")
    N2: float = float("nan")
    N1p: float = float("nan")
    N2p: float = float("nan")


@dataclass
class CoolingReport:
    delta: float
    delta0: float
    stable: bool
    M1: float
    M2: float
    max_re_eig: float
    var_q: Dict[str, float] = field(default_factory=dict)
    var_p: Dict[str, float] = field(default_factory=dict)
    V: Optional[np.ndarray] = None
    n_eff: float = float("nan")
    T_eff: float = float("nan")
    mean_energy: float = float("nan")
    consistency: float = float("nan")
    clamped: bool = False
    # q variance from the uncorrected (unsymmetrized) density, for comparison only
    spectral_printed: float = float("nan")
    steady: Optional[SteadyState] = None
    lp: Optional[LinearizedParams] = None
    errors: Dict[str, str] = field(default_factory=dict)


# -- Lyapunov -------------------------------------------------------------------

def solve_lyapunov(A, D) -> np.ndarray:
    """Solve A V + V A^T + D = 0 through the vectorized 16x16 system."""
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    n = A.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(A V) = (A kron I) vec V, vec(V A^T) = (I kron A) vec V
    op = np.kron(A, eye) + np.kron(eye, A)
    try:
        V = np.linalg.solve(op, -D.reshape(-1)).reshape(n, n)
    except np.linalg.LinAlgError:
        raise SingularSystem("Lyapunov operator is singular (marginal stability)") from None
    return 0.5 * (V + V.T)


def lyapunov_residual(A, V, D) -> float:
    """Frobenius norm of A V + V A^T + D, accumulated in extended precision."""
    A, V, D = (np.asarray(x, dtype=np.longdouble) for x in (A, V, D))
    R = A @ V + V @ A.T + D
    return float(np.sqrt(np.sum(R * R)))


def lyapunov_tolerance(A, V, D) -> float:
    """1e-10 |D| plus the floor set by storing V in double precision."""
    eps = np.finfo(float).eps
    return 1e-10 * np.linalg.norm(D) + 8 * eps * np.linalg.norm(A) * np.linalg.norm(V)


def variances_lyapunov(model: FluctuationModel) -> np.ndarray:
    max_re, stable = eigen_stability(model.A)
    if not stable:
        raise Unstable(f"drift matrix has an eigenvalue with real part {max_re:.3e}")
    # rescale time so the operator entries are O(1)
    s = max(np.abs(model.A).max(), 1e-300)
    A_s = model.A / s
    V = solve_lyapunov(A_s, model.D / s)
    if not np.all(np.isfinite(V)):
        raise SingularSystem("Lyapunov solve produced non-finite entries")
    for _ in range(4):
        R = (np.asarray(model.A, dtype=np.longdouble) @ V + V @ model.A.T.astype(np.longdouble)
             + model.D)
        if float(np.sqrt(np.sum(R * R))) <= lyapunov_tolerance(model.A, V, model.D):
            return V
        # iterative refinement against the extended-precision residual
        V = V + solve_lyapunov(A_s, np.asarray(R, dtype=float) / s)
    raise SingularSystem("Lyapunov residual does not reach tolerance (near-marginal system)")


# -- spectra --------------------------------------------------------------------

def _cd(omega, lp: LinearizedParams):
    C = lp.G_R - lp.G_I * (lp.Gamma2 - 1j * omega) / lp.Omega1
    Dw = (lp.kappa - 1j * omega) ** 2 + lp.delta_prime_sq
    return C, Dw


def force_noise_density(omega, lp: LinearizedParams):
    """Force-noise prefactor in its uncorrected form (not symmetrized)."""
    omega = np.asarray(omega, dtype=float)
    C, Dw = _cd(omega, lp)
    ratio = C / Dw
    th = lp.gamma * (2 * lp.nbar + 1)
    val = (th + th / lp.Omega1 * np.abs(lp.Gamma2 - 1j * omega - lp.delta * ratio) ** 2
           + 2 * lp.gamma * (omega + lp.delta * ratio.imag)
           + lp.kappa * np.abs(ratio) ** 2
           * (lp.delta ** 2 + lp.kappa ** 2 + omega ** 2 + lp.delta * omega))
    return val[()]


def force_noise_symmetrized(omega, lp: LinearizedParams,
                            corrections: Iterable[str] = ALL_CORRECTIONS):
    """Symmetrized force-noise spectrum S(w) with <dq^2> = (1/2pi) int |chi|^2 S dw."""
    corrections = frozenset(corrections)
    omega = np.asarray(omega, dtype=float)
    C, Dw = _cd(omega, lp)
    ratio = C / Dw
    th = lp.gamma * (2 * lp.nbar + 1)
    bracket_ratio = lp.G_I * ratio if "noise_q_bracket" in corrections else ratio
    norm = lp.Omega1 ** 2 if "noise_q_normalization" in corrections else lp.Omega1
    opt = lp.kappa * (2 * lp.n_th + 1 if "optical_occupancy" in corrections else 1)
    val = (th * (1 + np.abs(lp.Gamma2 - 1j * omega - lp.delta * bracket_ratio) ** 2 / norm)
           + opt * np.abs(ratio) ** 2 * (lp.delta ** 2 + lp.kappa ** 2 + omega ** 2))
    return val[()]


def _resonances(lp: LinearizedParams):
    A = build_fluctuation_model(lp).A
    lam = np.linalg.eigvals(A)
    # s = -i w: an eigenvalue -a + i b is a peak at |w| = |b| of width a
    return [(abs(z.imag), abs(z.real)) for z in lam]


def _breakpoints(lp: LinearizedParams, upper: float):
    """Split points spaced geometrically away from every resonance.

    Each segment then spans at most a factor two in distance from the nearest
    peak, so the integrand is smooth on it whatever the peak width.
    """
    pts = {0.0, upper}
    for centre, width in _resonances(lp):
        width = max(width, 1e-15 * max(centre, lp.kappa))
        pts.add(centre)
        offset = 0.125 * width
        while offset < upper:
            for p in (centre - offset, centre + offset):
                if 0 < p < upper:
                    pts.add(p)
            offset *= 2
    return sorted(pts)


def _integrate_spectrum(fun, lp: LinearizedParams, tol: float) -> float:
    """(1/2pi) int_{-inf}^{inf} fun(w) dw, split at the resonance structure."""
    scale = max(20 * lp.kappa, 20 * abs(lp.Omega1), 20 * abs(lp.Omega2), 5 * abs(lp.delta))
    centres = [c for c, _ in _resonances(lp)]
    upper = max(scale, 20 * max(centres))

    def both(w):
        return fun(w) + fun(-w)

    pts = _breakpoints(lp, upper)
    # rough trapezoid total sets an absolute floor, so segments far from every
    # peak are not refined to a relative precision they cannot affect
    vals = [both(p) for p in pts]
    rough = sum(0.5 * (va + vb) * (b - a)
                for a, b, va, vb in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]))
    floor = 1e-3 * tol * abs(rough) / len(pts)
    total = 0.0
    err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, e = quad(both, lo, hi, epsabs=floor, epsrel=0.1 * tol, limit=200)
        total += val
        err += e
    # tail on t = upper / w in (0, 1]; keeps w far from overflow
    val, e = quad(lambda t: both(upper / t) * upper / (t * t), 0.0, 1.0,
                  epsabs=floor, epsrel=0.1 * tol, limit=200)
    total += val
    err += e
    if not np.isfinite(total) or err > tol * abs(total):
        raise QuadratureStall(f"quadrature error {err:.3e} exceeds tolerance on {total:.3e}")
    return total / (2 * np.pi)


def _q_integrand(lp: LinearizedParams, density: str, corrections: FrozenSet[str]):
    """Scalar |chi(w)|^2 S(w) with constants hoisted; mirrors the array versions."""
    if density not in ("symmetrized", "printed"):
        raise ValueError(f"unknown density {density!r}")
    k, d = lp.kappa, lp.delta
    GR, GI = lp.G_R, lp.G_I
    O1, G1, G2 = lp.Omega1, lp.Gamma1, lp.Gamma2
    dp2 = lp.delta_prime_sq
    printed_chi = "chi_sign" not in corrections
    r2 = lp.Omega1 * lp.Omega2 + G1 * G2
    r = math.sqrt(abs(r2))
    th = lp.gamma * (2 * lp.nbar + 1)
    opt = k * (2 * lp.n_th + 1 if "optical_occupancy" in corrections else 1)
    g_bracket = GI if "noise_q_bracket" in corrections else 1.0
    norm = O1 * O1 if "noise_q_normalization" in corrections else O1
    pole_limit = 1e-12 * (k * k + d * d)

    def fun(w):
        den = (k - 1j * w) ** 2 + dp2
        if abs(den) < pole_limit:
            raise NearPole("frequency too close to an optical pole")
        C = GR - GI * (G2 - 1j * w) / O1
        ratio = C / den
        I_val = d * (GR + GI * (G1 - 1j * w) / O1) * C / den
        if printed_chi:
            mech = lp.Omega1 * lp.Omega2 + (G1 - 1j * w) * (G2 + 1j * w)
        else:
            real = (r - w) * (r + w) if r2 >= 0 else -(r * r + w * w)
            mech = complex(real, -w * (G1 + G2))
        chi_sq = O1 * O1 / abs(mech - O1 * I_val) ** 2
        ratio_sq = abs(ratio) ** 2
        if density == "symmetrized":
            S = (th * (1 + abs(G2 - 1j * w - d * g_bracket * ratio) ** 2 / norm)
                 + opt * ratio_sq * (d * d + k * k + w * w))
        else:
            S = (th + th / O1 * abs(G2 - 1j * w - d * ratio) ** 2
                 + 2 * lp.gamma * (w + d * ratio.imag)
                 + k * ratio_sq * (d * d + k * k + w * w + d * w))
        return chi_sq * S

    return fun


def variance_q_spectral(lp: LinearizedParams, quadrature_tol: float = 1e-6,
                        density: str = "symmetrized",
                        corrections: Iterable[str] = ALL_CORRECTIONS) -> float:
    """Position variance from |chi(w)|^2 times the force-noise spectrum.

    ``density='symmetrized'`` uses :func:`force_noise_symmetrized` with the
    given corrections; ``density='printed'`` integrates the full uncorrected
    spectrum.
    """
    if not routh_hurwitz(lp)[2]:
        raise Unstable("Routh-Hurwitz conditions violated")
    fun = _q_integrand(lp, density, frozenset(corrections))
    return _integrate_spectrum(fun, lp, quadrature_tol)


def _adjugate_row(A, row):
    """Coefficients of row ``row`` of adj(sI - A) as a polynomial in s (highest first)."""
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    rows = []
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * np.eye(n)
        rows.append(M[row].copy())
        coeffs.append(-np.trace(A @ M) / k)
    return np.array(rows)  # rows[j] multiplies s^(n-1-j)


def variance_p_spectral(lp: LinearizedParams, quadrature_tol: float = 1e-6) -> float:
    """Momentum variance from row p of the resolvent (s - A)^{-1} at s = -i w.

    The resolvent is formed as adjugate over determinant, with the determinant
    as a product over eigenvalues so that nothing cancels near a sharp peak.
    """
    if not routh_hurwitz(lp)[2]:
        raise Unstable("Routh-Hurwitz conditions violated")
    model = build_fluctuation_model(lp)
    A = model.A
    diff = np.diag(model.D)
    adj = _adjugate_row(A, 3)
    lam = np.linalg.eigvals(A)
    powers = np.arange(A.shape[0] - 1, -1, -1)

    def fun(w):
        s = -1j * w
        det = np.prod(s - lam)
        num = (s ** powers) @ adj
        return float(np.dot(np.abs(num) ** 2, diff) / abs(det) ** 2)

    return _integrate_spectrum(fun, lp, quadrature_tol)


# -- closed forms -----------------------------------------------------------------

def closed_form_coefficients(lp: LinearizedParams,
                          corrections: Iterable[str] = ALL_CORRECTIONS) -> ClosedFormCoefficients:
    corrections = frozenset(corrections)
    k, d, g = lp.kappa, lp.delta, lp.gamma
    GR, GI = lp.G_R, lp.G_I
    O1, O2, G1, G2 = lp.Omega1, lp.Omega2, lp.Gamma1, lp.Gamma2
    k2d2 = k * k + d * d
    mech = G1 * G2 + O1 * O2

    a1 = 2 * (g + k)
    a2 = -(d * d + k * k + mech + 4 * g * k)
    a3 = -2 * (g * k2d2 + k * mech)
    M1 = stability_m1(lp)
    M2 = _m2_partial(lp, corrections)
    a4 = M1  # only meaningful with "a4_undefined" applied; there is no printed value

    d3sq = d * d - d * GI ** 2 / O1
    d3psq = d * d - d * GR ** 2 / O2
    b1 = 1.0
    b2 = 2 * (k * k - d3sq)
    b3 = (k * k + d3sq) ** 2
    c1 = (GI / O1) ** 2
    c2 = k2d2 * c1 + (GR - GI * G2 / O1) ** 2
    c3 = k2d2 * (GR - GI * G2 / O1) ** 2
    d1 = 2 * (k * k - d * d) + G2 ** 2
    d2 = k2d2 ** 2 + 2 * G2 ** 2 * (k * k - d * d) + 2 * (2 * k + G2) * d * GI * GR
    d3 = (k2d2 * G2 - d * GI * GR) ** 2
    bp2 = 2 * (k * k - d3psq)
    bp3 = (k * k + d3psq) ** 2
    cp1 = (GR / O2) ** 2
    cp2 = k2d2 * cp1 + (GI + GR * G1 / O2) ** 2
    cp3 = k2d2 * (GI + GR * G1 / O2) ** 2
    dp1 = 2 * (k * k - d * d) + G1 ** 2
    dp2 = k2d2 ** 2 + 2 * G1 ** 2 * (k * k - d * d) - 2 * (2 * k + G1) * d * GI * GR
    dp3 = (k2d2 * G1 + d * GI * GR) ** 2
    return ClosedFormCoefficients(a1, a2, a3, a4, b1, b2, b3, c1, c2, c3, d1, d2, d3,
                                bp2, bp3, cp1, cp2, cp3, dp1, dp2, dp3,
                                d3sq, d3psq, M1, M2)


def _m2_partial(lp, corrections):
    """M2 with each of its two fixes applied only if named in ``corrections``."""
    k, d, g = lp.kappa, lp.delta, lp.gamma
    O12 = lp.Omega1 * lp.Omega2
    G12 = lp.Gamma1 * lp.Gamma2
    gamma_sq = 4 * g * g if "m2_gamma_sq" in corrections else g * g
    pref = (1.0 if "m2_coupling_prefactor" in corrections else 2.0) * (k + g) ** 2 / (k * g)
    combo = (lp.Omega2 * lp.G_I ** 2 + lp.Omega1 * lp.G_R ** 2
             + lp.G_R * lp.G_I * (lp.Gamma1 - lp.Gamma2))
    return (d ** 4 + d * d * (gamma_sq - 2 * G12 + 4 * k * g + 2 * (k * k - O12))
            + d * pref * combo + (O12 + (lp.Gamma1 + k) * (lp.Gamma2 + k)) ** 2)


def _n_blocks(ac: ClosedFormCoefficients, lp: LinearizedParams, corrections):
    a1, a2, a3, a4 = ac.a1, ac.a2, ac.a3, ac.a4
    M1 = ac.M1
    den = ac.M2
    if "n_block_denominator" in corrections:
        den = 4 * lp.kappa * lp.gamma * ac.M2
    tail = (a3 - a1 * a2) / (den * M1)
    common = (a2 * a3 - a1 * a4) / den
    N1 = 0.5 * (lp.Omega1 ** 2 * ((a1 * ac.b2 - a3 * ac.b1) / den + ac.b3 * tail)
                + (a1 * ac.d2 - a3 * ac.d1) / den + common + ac.d3 * tail)
    N2 = 0.5 * lp.Omega1 ** 2 * ((a1 * ac.c2 - a3 * ac.c1) / den + ac.c3 * tail)
    d1_for_p = ac.dp1 if "d1_primed" in corrections else ac.d1
    N1p = 0.5 * (lp.Omega2 ** 2 * ((a1 * ac.bp2 - a3 * ac.b1) / den + ac.bp3 * tail)
                 + (a1 * ac.dp2 - a3 * d1_for_p) / den + common + ac.dp3 * tail)
    N2p = 0.5 * lp.Omega2 ** 2 * ((a1 * ac.cp2 - a3 * ac.cp1) / den + ac.cp3 * tail)
    return N1, N2, N1p, N2p


def variances_closed(lp: LinearizedParams, corrections: Iterable[str] = ALL_CORRECTIONS):
    """(<dq^2>, <dp^2>) from the rational-integral closed forms."""
    corrections = frozenset(corrections)
    m1, m2, stable = routh_hurwitz(lp)
    if not stable:
        raise Unstable(f"Routh-Hurwitz conditions violated (M1={m1:.3e}, M2={m2:.3e})")
    ac = closed_form_coefficients(lp, corrections)
    N1, N2, N1p, N2p = _n_blocks(ac, lp, corrections)
    th = lp.gamma * (2 * lp.nbar + 1)
    opt = lp.kappa * (2 * lp.n_th + 1 if "optical_occupancy" in corrections else 1)
    return th * N1 + opt * N2, th * N1p + opt * N2p


def closed_form_blocks(lp: LinearizedParams,
                       corrections: Iterable[str] = ALL_CORRECTIONS) -> ClosedFormCoefficients:
    """Closed-form coefficients with the N-blocks filled in."""
    corrections = frozenset(corrections)
    ac = closed_form_coefficients(lp, corrections)
    N1, N2, N1p, N2p = _n_blocks(ac, lp, corrections)
    return ClosedFormCoefficients(**{**ac.__dict__, "N1": N1, "N2": N2, "N1p": N1p, "N2p": N2p})


def diffusion_matrix(lp: LinearizedParams, corrections: Iterable[str] = ALL_CORRECTIONS):
    """Diffusion matrix; without ``noise_y_quadrature`` both optical rows share X_in."""
    D = build_fluctuation_model(lp).D.copy()
    if "noise_y_quadrature" not in frozenset(corrections):
        D[0, 1] = D[1, 0] = D[0, 0]
    return D


def _even_square(a):
    """Coefficients in w^2 (highest first) of |a(-i w)|^2 for a real polynomial a(s).

    Works on exact rationals: the constant terms of these products cancel
    heavily when the rates span many decades.
    """
    a = list(a)
    while len(a) > 1 and a[0] == 0:
        a = a[1:]
    n = len(a) - 1
    flip = [a[i] * (-1) ** (n - i) for i in range(n + 1)]
    q = [Fraction(0)] * (2 * n + 1)
    for i, x in enumerate(a):
        for j, y in enumerate(flip):
            q[i + j] += x * y
    deg = 2 * n
    return [q[deg - p] * (-1) ** (p // 2) for p in range(deg, -1, -2)]


def _adjugate_polys(A):
    """Faddeev-LeVerrier in exact rational arithmetic.

    Returns ``adj[j][r][c]``: the coefficient of s^(n-1-j) in adj(sI - A)[r, c].
    """
    n = A.shape[0]
    Aq = [[Fraction(float(v)) for v in row] for row in A]
    eye = [[Fraction(int(r == c)) for c in range(n)] for r in range(n)]

    def matmul(X, Y):
        return [[sum(X[r][k] * Y[k][c] for k in range(n)) for c in range(n)] for r in range(n)]

    coeff = Fraction(1)
    M = [[Fraction(0)] * n for _ in range(n)]
    mats = []
    for k in range(1, n + 1):
        AM = matmul(Aq, M)
        M = [[AM[r][c] + coeff * eye[r][c] for c in range(n)] for r in range(n)]
        mats.append(M)
        AM = matmul(Aq, M)
        coeff = -sum(AM[i][i] for i in range(n)) / k
    return mats


def numerator_oracle(lp: LinearizedParams) -> Dict[str, float]:
    """Closed-form numerator coefficients recomputed from the adjugate of sI - A.

    |adj(sI - A)_{ij}(-i w)|^2 is an exact polynomial in w^2; the coefficient
    lists are its normalized coefficients (d: q-q, b: q-p / Omega1^2,
    c: q-optical / Omega1^2, and the primed lists for the p row).
    """
    adj = _adjugate_polys(build_fluctuation_model(lp).A)

    def entry(i, j):
        return _even_square([adj[k][i][j] for k in range(len(adj))])

    def total(x, y):
        n = max(len(x), len(y))
        x = [Fraction(0)] * (n - len(x)) + list(x)
        y = [Fraction(0)] * (n - len(y)) + list(y)
        return [u + v for u, v in zip(x, y)]

    def pad(poly, n):
        return np.array([float(v) for v in [Fraction(0)] * (n - len(poly)) + list(poly)])

    out = {}
    d = pad(entry(2, 2), 4)
    out.update(d1=d[1], d2=d[2], d3=d[3])
    b = pad(entry(2, 3), 3) / lp.Omega1 ** 2
    out.update(b1=b[0], b2=b[1], b3=b[2])
    c = pad(total(entry(2, 0), entry(2, 1)), 3) / lp.Omega1 ** 2
    out.update(c1=c[0], c2=c[1], c3=c[2])
    dp = pad(entry(3, 3), 4)
    out.update(dp1=dp[1], dp2=dp[2], dp3=dp[3])
    bp = pad(entry(3, 2), 3) / lp.Omega2 ** 2
    out.update(bp2=bp[1], bp3=bp[2])
    cp = pad(total(entry(3, 0), entry(3, 1)), 3) / lp.Omega2 ** 2
    out.update(cp1=cp[0], cp2=cp[1], cp3=cp[2])
    return out


@dataclass(frozen=True)
class Diagnosis:
    name: str
    closed_form: float
    reference: float
    rel_error: float


def diagnose_closed_form(lp: LinearizedParams, corrections: Iterable[str] = ALL_CORRECTIONS,
                         rtol: float = 1e-6):
    """Per-coefficient and per-block comparison of the closed forms.

    Coefficients are checked against :func:`numerator_oracle`; the N-blocks
    against Lyapunov solves driven by mechanical or optical noise alone.
    Returns the list of :class:`Diagnosis` entries whose relative error exceeds
    ``rtol`` (empty when everything agrees).
    """
    corrections = frozenset(corrections)
    ac = closed_form_blocks(lp, corrections)
    oracle = numerator_oracle(lp)
    bad = []
    for name, ref in oracle.items():
        val = getattr(ac, name)
        scale = max(abs(ref), abs(val), 1e-300)
        err = abs(val - ref) / scale
        if err > rtol:
            bad.append(Diagnosis(name, val, ref, err))
    A = build_fluctuation_model(lp).A
    mech = solve_lyapunov(A, np.diag([0.0, 0.0, 1.0, 1.0]))
    opt = solve_lyapunov(A, np.diag([1.0, 1.0, 0.0, 0.0]))
    refs = {"N1": mech[2, 2], "N1p": mech[3, 3], "N2": opt[2, 2], "N2p": opt[3, 3]}
    for name, ref in refs.items():
        val = getattr(ac, name)
        err = abs(val - ref) / max(abs(ref), 1e-300)
        if err > rtol:
            bad.append(Diagnosis(name, val, ref, err))
    return bad


# -- occupancy and temperature ------------------------------------------------------

def raw_phonon_number(var_q: float, var_p: float) -> float:
    return 0.5 * (var_q + var_p - 1.0)


def effective_phonon(var_q: float, var_p: float) -> float:
    """n_eff = (<dq^2> + <dp^2> - 1)/2, rounding noise in [-1e-9, 0) clamped to 0."""
    if var_q < 0 or var_p < 0:
        raise ValueError("variances must be non-negative")
    n = raw_phonon_number(var_q, var_p)
    if CLAMP_FLOOR <= n < 0:
        return 0.0
    if n < CLAMP_FLOOR:
        log.warning("n_eff = %.3e is below the Gaussian ground-state floor", n)
    return n


def effective_temperature(n_eff: float, omega_m: float, constants=CONSTANTS) -> float:
    if n_eff < 0:
        raise ValueError("n_eff must be >= 0")
    if n_eff == 0:
        return 0.0
    return constants.hbar * omega_m / (constants.k_B * math.log1p(1.0 / n_eff))


# -- orchestration ----------------------------------------------------------------

def cooling_report(config: SystemConfig, delta_target: Optional[float] = None, *,
                   bare: bool = False, quadrature_tol: float = 1e-6,
                   tol: float = coupling.DEFAULT_TOL, methods=("closed_form", "lyapunov", "spectral"),
                   expansion=None) -> CoolingReport:
    """Full pipeline at one detuning.

    ``delta_target`` is the effective detuning (rad/s) unless ``bare`` is set,
    in which case it is the bare detuning and the fixed point is solved for;
    ``None`` uses ``config.bare_detuning`` as the bare detuning.
    """
    from .steady_state import solve_steady

    derived = derive(config)
    if expansion is None:
        expansion = coupling.expand(config.reflectivity, derived.eta0, tol)
    eps, sig = expansion.epsilon, expansion.sigma
    if delta_target is None:
        delta_target, bare = config.bare_detuning, True
    if bare:
        ss = solve_steady(derived, eps, sig, delta_target)
    else:
        ss = steady_state_at(derived, eps, sig, delta_target)
    lp = linearize(ss, derived, eps, sig)
    model = build_fluctuation_model(lp)
    m1, m2, stable = routh_hurwitz(lp)
    max_re, _ = eigen_stability(model.A)
    rep = CoolingReport(delta=ss.delta, delta0=ss.delta0, stable=stable, M1=m1, M2=m2,
                        max_re_eig=max_re, steady=ss, lp=lp)
    if not stable:
        rep.errors["stability"] = "unstable"
        return rep

    runners = {
        "lyapunov": lambda: variances_lyapunov(model),
        "closed_form": lambda: variances_closed(lp),
        "spectral": lambda: (variance_q_spectral(lp, quadrature_tol),
                             variance_p_spectral(lp, quadrature_tol)),
    }
    for name in methods:
        try:
            out = runners[name]()
        except MimcoolError as exc:
            rep.errors[name] = f"{type(exc).__name__}: {exc}"
            continue
        if name == "lyapunov":
            rep.V = out
            rep.var_q[name], rep.var_p[name] = float(out[2, 2]), float(out[3, 3])
        else:
            rep.var_q[name], rep.var_p[name] = float(out[0]), float(out[1])

    if "spectral" in methods:
        try:
            rep.spectral_printed = variance_q_spectral(lp, quadrature_tol, density="printed")
        except MimcoolError as exc:
            rep.errors["spectral_printed"] = f"{type(exc).__name__}: {exc}"

    ref = "lyapunov" if "lyapunov" in rep.var_q else next(iter(rep.var_q), None)
    if ref is None:
        return rep
    vq, vp = rep.var_q[ref], rep.var_p[ref]
    raw = raw_phonon_number(vq, vp)
    rep.clamped = CLAMP_FLOOR <= raw < 0
    rep.n_eff = effective_phonon(vq, vp)
    rep.T_eff = effective_temperature(max(rep.n_eff, 0.0), derived.omega_m)
    rep.mean_energy = CONSTANTS.hbar * derived.omega_m * (rep.n_eff + 0.5)
    spread = [abs(rep.var_q[m] - vq) / vq for m in rep.var_q]
    spread += [abs(rep.var_p[m] - vp) / vp for m in rep.var_p]
    rep.consistency = max(spread)
    return rep
