"""Mechanical susceptibility and the effective frequency / damping spectra.

Frequencies follow the convention f(w) = (1/2pi) int dt e^{i w t} f(t), so a
time derivative becomes -i w.  With that convention

    Omega1 / chi(w) = w_eff^2(w) - w^2 - i w gamma_eff(w),

which is what ties the closed forms below to :func:`susceptibility`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearPole
from .steady_state import LinearizedParams

DEFAULT_GRID_POINTS = 2001


@dataclass(frozen=True)
class MuCoefficients:
    mu1: float
    mu2: float
    mu3: float
    delta_prime_sq: float


@dataclass(frozen=True)
class ResponsePoint:
    omega: float
    chi: complex
    I_val: complex
    omega_eff_sq: float
    gamma_eff: float


def _optical_denominator(omega, lp: LinearizedParams):
    """(kappa - i w)^2 + Delta'^2, with Delta'^2 = Delta^2 - Delta G_I^2 / Omega1."""
    return (lp.kappa - 1j * omega) ** 2 + lp.delta_prime_sq


def _check_pole(den, lp):
    limit = 1e-12 * (lp.kappa ** 2 + lp.delta ** 2)
    if np.any(np.abs(den) < limit):
        raise NearPole("frequency too close to an optical pole")


def I_of_omega(omega, lp: LinearizedParams):
    omega = np.asarray(omega, dtype=float)
    den = _optical_denominator(omega, lp)
    _check_pole(den, lp)
    left = lp.G_R + lp.G_I * (lp.Gamma1 - 1j * omega) / lp.Omega1
    right = lp.G_R - lp.G_I * (lp.Gamma2 - 1j * omega) / lp.Omega1
    return (lp.delta * left * right / den)[()]


def inverse_susceptibility(omega, lp: LinearizedParams, printed: bool = False):
    """1/chi(w).

    The mechanical factor is (Gamma1 - i w)(Gamma2 - i w), as follows from
    eliminating dp from the linear equations; ``printed=True`` uses the
    uncorrected (Gamma2 + i w) instead, which has no resonance at w ~ w_m.
    """
    omega = np.asarray(omega, dtype=float)
    if printed:
        mech = (lp.Omega1 * lp.Omega2 + (lp.Gamma1 - 1j * omega) * (lp.Gamma2 + 1j * omega))
    else:
        # Omega1 Omega2 + Gamma1 Gamma2 - w^2 as (r - w)(r + w): exact near the peak
        r2 = lp.Omega1 * lp.Omega2 + lp.Gamma1 * lp.Gamma2
        r = np.sqrt(abs(r2))
        real = (r - omega) * (r + omega) if r2 >= 0 else -(r * r + omega * omega)
        mech = real - 1j * omega * (lp.Gamma1 + lp.Gamma2)
    inv = (mech - lp.Omega1 * I_of_omega(omega, lp)) / lp.Omega1
    return inv[()] if np.ndim(inv) == 0 else inv


def susceptibility(omega, lp: LinearizedParams, printed: bool = False):
    inv = np.asarray(inverse_susceptibility(omega, lp, printed))
    scale = lp.Omega1 ** 2 + lp.Omega2 ** 2 + lp.kappa ** 2 + lp.delta ** 2
    if np.any(np.abs(inv) * abs(lp.Omega1) < 1e-14 * scale):
        raise NearPole("frequency too close to a pole of the susceptibility")
    return (1.0 / inv)[()]


def mu_coefficients(lp: LinearizedParams) -> MuCoefficients:
    k, g = lp.kappa, lp.gamma
    GR, GI = lp.G_R, lp.G_I
    O1, G1, G2 = lp.Omega1, lp.Gamma1, lp.Gamma2
    dp2 = lp.delta_prime_sq
    mu1 = (k * k + dp2) * (G1 * GI + O1 * GR) * (O1 * GR - G2 * GI)
    mu2 = ((k * k + G1 * G2 - 2 * k * (G1 + G2) + dp2) * GI ** 2
           + (G2 - G1) * O1 * GI * GR - O1 ** 2 * GR ** 2)
    mu3 = g * GI ** 2 * (k * k + dp2) + k * (O1 ** 2 * GR ** 2 + O1 * GI * GR * (G1 - G2)
                                          - GI ** 2 * G1 * G2)
    return MuCoefficients(mu1, mu2, mu3, dp2)


def lorentz_product(omega, lp: LinearizedParams):
    """[kappa^2 + (w - Delta')^2][kappa^2 + (w + Delta')^2] = |(kappa - i w)^2 + Delta'^2|^2."""
    omega = np.asarray(omega, dtype=float)
    k2 = lp.kappa ** 2
    dp2 = lp.delta_prime_sq
    if dp2 >= 0:
        dp = np.sign(lp.delta) * np.sqrt(dp2)
        return (k2 + (omega - dp) ** 2) * (k2 + (omega + dp) ** 2)
    # Delta' imaginary: same polynomial, kept real
    return (k2 + dp2 - omega ** 2) ** 2 + 4 * k2 * omega ** 2


def effective_frequency_sq(omega, lp: LinearizedParams):
    omega = np.asarray(omega, dtype=float)
    mu = mu_coefficients(lp)
    num = lp.delta * (mu.mu1 + mu.mu2 * omega ** 2 - lp.G_I ** 2 * omega ** 4)
    val = (lp.Gamma1 * lp.Gamma2 + lp.Omega1 * lp.Omega2
           - num / (lp.Omega1 * lorentz_product(omega, lp)))
    return val[()]


def effective_damping(omega, lp: LinearizedParams, printed: bool = False):
    """Effective energy damping rate gamma_eff(w); equals 2 gamma when uncoupled.

    The w^2 term of the numerator is (kappa - gamma) G_I^2 w^2, as required by
    the imaginary part of Omega1/chi.  ``printed=True`` uses the uncorrected
    -(kappa + gamma) G_I^2 w^2.
    """
    omega = np.asarray(omega, dtype=float)
    mu = mu_coefficients(lp)
    if printed:
        w2 = -(lp.kappa + lp.gamma) * lp.G_I ** 2 * omega ** 2
    else:
        w2 = (lp.kappa - lp.gamma) * lp.G_I ** 2 * omega ** 2
    val = 2 * lp.gamma + 2 * lp.delta * (mu.mu3 + w2) / (lp.Omega1 * lorentz_product(omega, lp))
    return val[()]


def response_point(omega: float, lp: LinearizedParams) -> ResponsePoint:
    return ResponsePoint(
        omega=float(omega),
        chi=complex(susceptibility(omega, lp)),
        I_val=complex(I_of_omega(omega, lp)),
        omega_eff_sq=float(effective_frequency_sq(omega, lp)),
        gamma_eff=float(effective_damping(omega, lp)),
    )


def decomposition_residuals(omega, lp: LinearizedParams, printed_damping: bool = False):
    """Relative mismatch of the closed forms against Omega1/chi(w).

    Returns ``(freq_residual, damping_residual)`` as max relative errors over
    ``omega`` (which should avoid w = 0 for the damping comparison).
    """
    omega = np.asarray(omega, dtype=float)
    oi = lp.Omega1 * I_of_omega(omega, lp)
    w2_ref = lp.Gamma1 * lp.Gamma2 + lp.Omega1 * lp.Omega2 - oi.real
    g_ref = lp.Gamma1 + lp.Gamma2 + oi.imag / omega
    w2 = effective_frequency_sq(omega, lp)
    g = effective_damping(omega, lp, printed=printed_damping)
    w2_scale = np.abs(lp.Gamma1 * lp.Gamma2 + lp.Omega1 * lp.Omega2) + np.abs(oi.real)
    g_scale = np.abs(g_ref) + 2 * abs(lp.gamma)
    return (float(np.max(np.abs(w2 - w2_ref) / w2_scale)),
            float(np.max(np.abs(g - g_ref) / g_scale)))


def frequency_grid(omega_m: float, points: int = DEFAULT_GRID_POINTS, upper: float = 2.0):
    return np.linspace(0.0, upper * omega_m, points)
