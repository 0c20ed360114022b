"""Semiclassical fixed point, linearization and the 4x4 fluctuation model.

Fluctuation vector ordering is ``(dX, dY, dq, dp)`` throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import EigenFailure, NoConvergence, RootNotBracketed
from .params import DerivedParams

SOLVER_TOL = 1e-12


@dataclass(frozen=True)
class SteadyState:
    delta: float  # effective detuning
    a_s: float
    b_s: complex
    G: complex
    residual: float
    branch_note: str = "unique"  # unique | multistable-lower | multistable-upper
    delta0: float = float("nan")
    alternatives: Tuple[float, ...] = field(default=())  # other effective detunings


@dataclass(frozen=True)
class LinearizedParams:
    Omega_m: float
    Omega1: float
    Omega2: float
    Gamma1: float
    Gamma2: float
    G_R: float
    G_I: float
    delta: float
    kappa: float
    gamma: float
    nbar: float
    n_th: float = 0.0

    @property
    def delta_prime_sq(self) -> float:
        return self.delta ** 2 - self.delta * self.G_I ** 2 / self.Omega1


@dataclass(frozen=True)
class FluctuationModel:
    A: np.ndarray
    D: np.ndarray


# -- fixed point ---------------------------------------------------------------

def _phonon_amplitude(drive: float, omega_m: float, gamma: float, eps: float,
                      sigma: float) -> complex:
    """Solve b (w_m - i gamma) = drive [eps + sigma (2|b|^2 + b^2)] for b.

    ``drive`` is g a_s^2.  Writing b = x + i y the imaginary part gives
    y = gamma x / (w_m - 2 drive sigma x), leaving one real equation in x.
    """
    if drive == 0 or eps == 0 and sigma == 0:
        return 0j

    def y_of(x):
        return gamma * x / (omega_m - 2 * drive * sigma * x)

    def h(x):
        y = y_of(x)
        return omega_m * x + gamma * y - drive * (eps + sigma * (3 * x * x + y * y))

    x_hi = drive * eps / omega_m
    if sigma <= 0 and eps > 0:
        lo, hi = 0.0, x_hi
        if h(hi) < 0:  # only from rounding when sigma |b|^2 is negligible
            hi = x_hi * (1 + 1e-9) + 1e-300
    else:
        lo, hi = _bracket(h, x_hi)
    x = brentq(h, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    b = complex(x, y_of(x))
    return _polish_b(b, drive, omega_m, gamma, eps, sigma)


def _bracket(fun, guess):
    step = max(abs(guess), 1e-12)
    lo, hi = guess - step, guess + step
    for _ in range(200):
        if fun(lo) * fun(hi) <= 0:
            return lo, hi
        lo -= step
        hi += step
        step *= 2
    raise RootNotBracketed("no phonon amplitude root found")


def _b_residual(b, drive, omega_m, gamma, eps, sigma):
    return b * (omega_m - 1j * gamma) - drive * (eps + sigma * (2 * abs(b) ** 2 + b * b))


def _polish_b(b, drive, omega_m, gamma, eps, sigma, steps=3):
    # Newton on (Re, Im) with the analytic Jacobian
    for _ in range(steps):
        r = _b_residual(b, drive, omega_m, gamma, eps, sigma)
        x, y = b.real, b.imag
        # d/dx and d/dy of the complex residual
        dx = (omega_m - 1j * gamma) - drive * sigma * (4 * x + 2 * x + 2j * y)
        dy = (1j * omega_m + gamma) - drive * sigma * (4 * y - 2 * y + 2j * x)
        jac = np.array([[dx.real, dy.real], [dx.imag, dy.imag]])
        try:
            step = np.linalg.solve(jac, [-r.real, -r.imag])
        except np.linalg.LinAlgError:
            break
        nb = complex(x + step[0], y + step[1])
        if abs(_b_residual(nb, drive, omega_m, gamma, eps, sigma)) >= abs(r):
            break
        b = nb
    return b


def intracavity_amplitude(E: float, kappa: float, delta: float) -> float:
    return E / math.hypot(kappa, delta)


def _state_at(derived: DerivedParams, eps: float, sigma: float, delta: float, E=None):
    E = derived.E if E is None else E
    a_s = intracavity_amplitude(E, derived.kappa, delta)
    b_s = _phonon_amplitude(derived.g * a_s * a_s, derived.omega_m, derived.gamma, eps, sigma)
    return a_s, b_s


def detuning_shift(derived: DerivedParams, eps: float, sigma: float, delta: float, E=None) -> float:
    """Radiation-pressure shift delta0 - delta at effective detuning ``delta``."""
    _, b_s = _state_at(derived, eps, sigma, delta, E)
    return 2 * derived.g * b_s.real * (eps + sigma * abs(b_s) ** 2)


def steady_residual(derived, eps, sigma, delta0, delta, a_s, b_s) -> float:
    """Largest relative violation of the three steady-state equations."""
    g = derived.g
    r_a = abs(a_s - intracavity_amplitude(derived.E, derived.kappa, delta)) / max(a_s, 1e-300)
    drive = g * a_s * a_s
    rb = abs(_b_residual(b_s, drive, derived.omega_m, derived.gamma, eps, sigma))
    scale_b = max(abs(b_s) * derived.omega_m, drive * abs(eps), 1e-300)
    shift = 2 * g * b_s.real * (eps + sigma * abs(b_s) ** 2)
    r_d = abs(delta - (delta0 - shift)) / max(abs(delta0), abs(delta), abs(shift),
                                              derived.omega_m)
    if a_s == 0:
        r_a = 0.0
    return max(r_a, rb / scale_b, r_d)


def _finish(derived, eps, sigma, delta0, delta, note="unique", alternatives=()):
    a_s, b_s = _state_at(derived, eps, sigma, delta)
    G = 2 * a_s * derived.g * (eps + sigma * (b_s * b_s + 2 * abs(b_s) ** 2))
    res = steady_residual(derived, eps, sigma, delta0, delta, a_s, b_s)
    return SteadyState(delta, a_s, b_s, complex(G), res, note, delta0, tuple(alternatives))


def target_detuning(derived: DerivedParams, eps: float, sigma: float, delta_target: float) -> float:
    """Bare detuning whose steady state has effective detuning ``delta_target``.

    a_s depends only on the effective detuning, so the map is explicit:
    delta0 = delta + 2 g Re(b_s) (eps + sigma |b_s|^2).
    """
    return delta_target + detuning_shift(derived, eps, sigma, delta_target)


def steady_state_at(derived: DerivedParams, eps: float, sigma: float,
                    delta_target: float) -> SteadyState:
    """Steady state on the branch with the given effective detuning."""
    delta0 = target_detuning(derived, eps, sigma, delta_target)
    return _finish(derived, eps, sigma, delta0, delta_target)


def _scan_grid(lo, hi, kappa, points):
    """Uniform grid on [lo, hi] refined geometrically around zero detuning.

    The shift only has structure within a few kappa of resonance, which a
    uniform grid over a window of many omega_m would step straight over.
    """
    grid = [np.linspace(lo, hi, points)]
    offsets = kappa * np.geomspace(1e-3, max(abs(lo), abs(hi), 2e-3 * kappa) / kappa, points)
    grid.append(np.concatenate((-offsets, [0.0], offsets)))
    grid = np.unique(np.concatenate(grid))
    return grid[(grid >= lo) & (grid <= hi)]


def _all_roots(fun, grid):
    vals = np.array([fun(d) for d in grid])
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(fun, grid[i], grid[i + 1], xtol=1e-300, rtol=1e-15))
    if vals[-1] == 0:
        roots.append(grid[-1])
    return roots


def solve_steady(derived: DerivedParams, eps: float, sigma: float, delta0: float,
                 steps: int = 20, alpha: float = 0.5, max_iter: int = 2000,
                 scan_points: int = 401) -> SteadyState:
    """Self-consistent fixed point for a given bare detuning.

    The drive is ramped from zero in ``steps`` geometric steps and the
    effective detuning followed by damped iteration, which selects the
    branch connected to the undriven state.  Oscillating iterations fall back
    to bracketing.  The window of admissible detunings is then scanned; more
    than one root marks the point as multistable.
    """
    if derived.kappa <= 0:
        raise ValueError("kappa must be > 0")
    if derived.E == 0 or (eps == 0 and sigma == 0):
        return _finish(derived, eps, sigma, delta0, delta0)

    scale = max(abs(delta0), derived.omega_m, derived.kappa)
    delta = delta0
    for E in derived.E * np.geomspace(1e-6, 1.0, steps):
        def fixed(d, E=E):
            return delta0 - detuning_shift(derived, eps, sigma, d, E)

        for _ in range(max_iter):
            new = (1 - alpha) * delta + alpha * fixed(delta)
            if abs(new - delta) <= 1e-15 * scale:
                delta = new
                break
            delta = new
        else:
            delta = _bracketed_fixed_point(fixed, delta, scale)

    def F(d):
        return d - delta0 + detuning_shift(derived, eps, sigma, d)

    # polish on the full-drive map
    try:
        lo, hi = _local_bracket(F, delta, scale)
        delta = brentq(F, lo, hi, xtol=1e-300, rtol=1e-15)
    except RootNotBracketed:
        pass

    bound = _shift_bound(derived, eps, sigma)
    roots = []
    if bound > 0:
        grid = _scan_grid(delta0 - bound, delta0 + bound, derived.kappa, scan_points)
        roots = _all_roots(F, grid)
    others = [r for r in roots if abs(r - delta) > 1e-9 * scale]
    note = "unique"
    if others:
        a_here = intracavity_amplitude(derived.E, derived.kappa, delta)
        lower = all(a_here <= intracavity_amplitude(derived.E, derived.kappa, r) for r in others)
        note = "multistable-lower" if lower else "multistable-upper"
    ss = _finish(derived, eps, sigma, delta0, delta, note, others)
    if ss.residual > SOLVER_TOL:
        raise NoConvergence("steady state did not converge", ss.residual)
    return ss


def _shift_bound(derived, eps, sigma):
    """Upper bound on |delta0 - delta| over all effective detunings."""
    # the drive g a_s^2 peaks on resonance; b_s need not grow monotonically
    # with it once sigma bites, so take the worst case over the drive range
    a_max = derived.E / derived.kappa
    worst = 0.0
    for drive in derived.g * a_max ** 2 * np.geomspace(1e-8, 1.0, 81):
        b = _phonon_amplitude(drive, derived.omega_m, derived.gamma, eps, sigma)
        worst = max(worst, abs(b) * (abs(eps) + abs(sigma) * abs(b) ** 2))
    return 1.01 * 2 * derived.g * worst


def _local_bracket(fun, x, scale):
    step = 1e-10 * scale
    f0 = fun(x)
    if f0 == 0:
        return x, x
    for _ in range(80):
        for y in (x - step, x + step):
            if fun(y) * f0 <= 0:
                return (min(x, y), max(x, y))
        step *= 2
    raise RootNotBracketed("could not bracket the detuning self-consistency root")


def _bracketed_fixed_point(fixed, guess, scale):
    def F(d):
        return d - fixed(d)
    lo, hi = _local_bracket(F, guess, scale)
    return brentq(F, lo, hi, xtol=1e-300, rtol=1e-15)


# -- linearization ---------------------------------------------------------------

def linearize(ss: SteadyState, derived: DerivedParams, eps: float, sigma: float) -> LinearizedParams:
    g = derived.g
    a2 = ss.a_s ** 2
    re_b, im_b = ss.b_s.real, ss.b_s.imag
    G = 2 * ss.a_s * g * (eps + sigma * (ss.b_s ** 2 + 2 * abs(ss.b_s) ** 2))
    Omega_m = derived.omega_m - 4 * g * sigma * a2 * re_b
    split_w = 2 * g * sigma * a2 * re_b
    split_g = 2 * g * sigma * a2 * im_b
    return LinearizedParams(
        Omega_m=Omega_m,
        Omega1=Omega_m + split_w,
        Omega2=Omega_m - split_w,
        Gamma1=derived.gamma + split_g,
        Gamma2=derived.gamma - split_g,
        G_R=float(G.real),
        G_I=float(G.imag),
        delta=ss.delta,
        kappa=derived.kappa,
        gamma=derived.gamma,
        nbar=derived.nbar,
        n_th=derived.n_th,
    )


def build_fluctuation_model(lp: LinearizedParams) -> FluctuationModel:
    k, d = lp.kappa, lp.delta
    A = np.array([
        [-k, d, 0.0, 0.0],
        [-d, -k, lp.G_R, lp.G_I],
        [-lp.G_I, 0.0, -lp.Gamma1, lp.Omega1],
        [lp.G_R, 0.0, -lp.Omega2, -lp.Gamma2],
    ])
    opt = k * (2 * lp.n_th + 1)
    mech = lp.gamma * (2 * lp.nbar + 1)
    return FluctuationModel(A, np.diag([opt, opt, mech, mech]))


# -- stability -------------------------------------------------------------------

def char_poly(lp: LinearizedParams) -> Tuple[float, float, float, float]:
    """Coefficients (c1, c2, c3, c4) of det(s I - A) = s^4 + c1 s^3 + ... + c4."""
    k, d = lp.kappa, lp.delta
    G1, G2, O1, O2 = lp.Gamma1, lp.Gamma2, lp.Omega1, lp.Omega2
    mech = G1 * G2 + O1 * O2
    c1 = 2 * k + G1 + G2
    c2 = k * k + d * d + mech + 2 * k * (G1 + G2)
    c3 = (d * d + k * k) * (G1 + G2) + 2 * k * mech
    c4 = stability_m1(lp)
    return c1, c2, c3, c4


def _coupling_combo(lp):
    return (lp.Omega2 * lp.G_I ** 2 + lp.Omega1 * lp.G_R ** 2
            + lp.G_R * lp.G_I * (lp.Gamma1 - lp.Gamma2))


def stability_m1(lp: LinearizedParams) -> float:
    k2d2 = lp.kappa ** 2 + lp.delta ** 2
    return (k2d2 * (lp.Omega1 * lp.Omega2 + lp.Gamma1 * lp.Gamma2)
            - lp.delta * _coupling_combo(lp))


def stability_m2(lp: LinearizedParams, printed: bool = False) -> float:
    """Second Routh-Hurwitz combination, normalized so the Delta^4 term is 1.

    The corrected form equals the third Hurwitz determinant divided by
    4 kappa gamma.  ``printed=True`` reproduces the uncorrected expression,
    whose Delta^2 coefficient carries gamma^2 instead of 4 gamma^2 and whose
    coupling term is doubled.
    """
    k, d, g = lp.kappa, lp.delta, lp.gamma
    O12 = lp.Omega1 * lp.Omega2
    G12 = lp.Gamma1 * lp.Gamma2
    gamma_sq = g * g if printed else 4 * g * g
    coupling_pref = (2.0 if printed else 1.0) * (k + g) ** 2 / (k * g)
    return (d ** 4
            + d * d * (gamma_sq - 2 * G12 + 4 * k * g + 2 * (k * k - O12))
            + d * coupling_pref * _coupling_combo(lp)
            + (O12 + (lp.Gamma1 + k) * (lp.Gamma2 + k)) ** 2)


def hurwitz_determinant(lp: LinearizedParams) -> float:
    """Third Hurwitz determinant c1 c2 c3 - c3^2 - c1^2 c4, as 4 kappa gamma M2."""
    return 4 * lp.kappa * lp.gamma * stability_m2(lp)


def routh_hurwitz(lp: LinearizedParams, printed: bool = False) -> Tuple[float, float, bool]:
    m1 = stability_m1(lp)
    m2 = stability_m2(lp, printed=printed)
    return m1, m2, bool(m1 > 0 and m2 > 0)


def _faddeev_leverrier(A):
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(A @ M) / k)
    return np.array(coeffs)


def eigen_stability(A) -> Tuple[float, bool]:
    """Largest real part of the eigenvalues of A and whether it is negative.

    LAPACK eigenvalues are refined by Newton steps on the characteristic
    polynomial.
    """
    A = np.asarray(A, dtype=float)
    lam = np.linalg.eigvals(A)
    poly = _faddeev_leverrier(A)
    dpoly = np.polyder(poly)
    scale = max(np.abs(lam).max(), 1e-300)
    polished = []
    for z in lam:
        for _ in range(4):
            p = np.polyval(poly, z)
            dp = np.polyval(dpoly, z)
            if dp == 0 or p == 0:
                break
            nz = z - p / dp
            if abs(np.polyval(poly, nz)) < abs(p) and abs(nz - z) < 1e-6 * scale:
                z = nz
            else:
                break
        if not np.isfinite(z):
            raise EigenFailure("eigenvalue polishing produced a non-finite value")
        polished.append(z)
    max_re = float(max(z.real for z in polished))
    return max_re, max_re < 0


def eigenvalues(A) -> np.ndarray:
    return np.linalg.eigvals(np.asarray(A, dtype=float))
