"""Periodic cavity detuning series and the phonon-number dependent coupling.

The membrane shifts the cavity resonance as

    omega_c(x) = (c/L) * arccos(r_c * cos(4 pi x / lambda)),

which expands into harmonics ``mu = m - 2k`` of the phase ``4 pi x / lambda``
with weights

    w(m, k) = (r_c^m / m) * C(m, k) * (m-1)! / (4^(m-1) * ((m-1)/2)!^2)

over odd ``m`` and ``0 <= k <= (m-1)/2``.  For ``r_c`` close to one the
series in ``m`` converges slowly (like ``r_c^m``), so weights are accumulated
per harmonic ``mu`` with ratio recurrences; nothing is ever formed from
factorials directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from .errors import TruncationError
from .params import CONSTANTS

DEFAULT_TOL = 1e-12
# large enough for r_c = 0.9999 at the default tolerance
DEFAULT_M_CAP = 400_001


@dataclass(frozen=True)
class SeriesTerm:
    m: int
    k: int
    mu: int
    weight: float


@dataclass(frozen=True)
class CouplingExpansion:
    """Truncated detuning series with its linearized coupling scalars.

    ``mu`` holds the odd harmonics and ``weight`` the total weight of every
    included ``(m, k)`` pair with ``m - 2k == mu`` (i.e. summed over ``m``).
    """

    r_c: float
    eta0: float
    tol: float
    m_max: int
    mu: np.ndarray
    weight: np.ndarray
    epsilon: float
    sigma: float
    tail_estimate: float

    def gaussian(self) -> np.ndarray:
        return np.exp(-0.5 * (self.eta0 * self.mu) ** 2)

    def with_eta0(self, eta0: float) -> "CouplingExpansion":
        eps, sig = _eps_sigma(self.mu, self.weight, eta0)
        return CouplingExpansion(self.r_c, eta0, self.tol, self.m_max, self.mu,
                                 self.weight, eps, sig, self.tail_estimate)

    def f_linear(self, n_b):
        return self.epsilon + self.sigma * np.asarray(n_b, dtype=float)


def _harmonic_cutoff(r_c: float, tol: float) -> int:
    """Largest harmonic worth tracking.

    Harmonic weights decay like rho^mu with rho = r/(1 + sqrt(1 - r^2)) (the
    nearest complex singularity of arccos(r cos phi)); keep every mu whose
    mu^3-weighted size can still exceed 1e-3 * tol.
    """
    rho = r_c / (1.0 + math.sqrt(1.0 - r_c * r_c))
    log_rho = math.log(rho)
    target = math.log(1e-3 * tol)
    mu = 1
    step = 1
    # mu^3 rho^mu is unimodal; walk out with doubling steps then refine
    while 3 * math.log(mu) + mu * log_rho > target or mu < -3 / log_rho:
        mu += step
        step *= 2
    lo = max(1, mu - step)
    while lo < mu:
        mid = (lo + mu) // 2
        if 3 * math.log(mid) + mid * log_rho > target or mid < -3 / log_rho:
            lo = mid + 1
        else:
            mu = mid
    return mu | 1


@lru_cache(maxsize=64)
def harmonic_weights(r_c: float, tol: float = DEFAULT_TOL,
                     m_cap: int = DEFAULT_M_CAP) -> Tuple[np.ndarray, np.ndarray, int, float]:
    """Per-harmonic weights ``(mu, A_mu, m_max, tail_estimate)``.

    Blocks of constant odd ``m`` are added until three consecutive blocks each
    have a geometric tail bound ``block / (1 - r_c^2)`` below ``tol`` times the
    running ``sum w mu^3`` (which also bounds the plain and ``mu``-weighted
    sums).  Results are cached and returned as read-only arrays.
    """
    if not 0 <= r_c < 1:
        raise ValueError("r_c must satisfy 0 <= r_c < 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if r_c == 0:
        empty = np.zeros(0)
        empty.flags.writeable = False
        return empty, empty, 0, 0.0

    mu_cut = _harmonic_cutoff(r_c, tol)
    mu = np.arange(1, mu_cut + 1, 2, dtype=float)
    n = mu.size
    mu3 = mu ** 3
    r2 = r_c * r_c
    tail_factor = 1.0 / (1.0 - r2)

    # log w(mu, 0) = mu log r + log B(mu) - log mu, B(1) = 1,
    # B(m+2)/B(m) = m / (4 (m+1))
    log_b = np.concatenate(([0.0], np.cumsum(np.log(mu[:-1] / (4.0 * (mu[:-1] + 1.0))))))
    log_w0 = mu * math.log(r_c) + log_b - np.log(mu)

    mant = np.zeros(n)
    scale = np.zeros(n)
    ex = np.zeros(n)  # exp(scale), refreshed on rescale only
    acc = np.zeros(n)
    running = block = 0.0
    quiet = 0
    m = 1
    active = 0
    while True:
        if m > m_cap:
            raise TruncationError(
                f"r_c = {r_c} needs m_max > {m_cap} to reach tol = {tol:g}",
                block * tail_factor / running if running > 0 else math.inf)
        # advance existing harmonics from m - 2 to m
        if active:
            mu_a = mu[:active]
            j = 0.5 * (m - mu_a)
            mant[:active] *= r2 * (m - 2.0) ** 2 / (4.0 * j * (m - j))
        if m <= mu_cut:
            i = active
            mant[i] = 1.0
            scale[i] = log_w0[i]
            ex[i] = math.exp(log_w0[i])
            active += 1
        sl = slice(0, active)
        acc[sl] += mant[sl]
        big = mant[sl] > 1e100
        if big.any():
            idx = np.nonzero(big)[0]
            f = mant[idx]
            acc[idx] /= f
            scale[idx] += np.log(f)
            ex[idx] = np.exp(scale[idx])
            mant[idx] = 1.0
        block = float(np.dot(ex[sl] * mant[sl], mu3[sl]))
        running += block
        if running > 0 and block * tail_factor < tol * running:
            quiet += 1
            if quiet >= 3 and m >= mu_cut:
                break
        else:
            quiet = 0
        m += 2

    weight = np.exp(scale) * acc
    tail = block * tail_factor / running
    mu.flags.writeable = False
    weight.flags.writeable = False
    return mu, weight, m, tail


def series_terms(r_c: float, tol: float = DEFAULT_TOL,
                 m_max: int | None = None) -> Tuple[List[SeriesTerm], int]:
    """Explicit ``(m, k)`` terms up to ``m_max``.

    ``m_max`` defaults to the adaptive value of :func:`harmonic_weights`.
    The list grows like ``m_max^2 / 4`` so this is meant for inspection at
    moderate ``r_c``.
    """
    if r_c == 0:
        return [], 0
    if m_max is None:
        m_max = harmonic_weights(r_c, tol)[2]
    if m_max % 2 == 0:
        raise ValueError("m_max must be odd")
    terms = []
    # row holds w(m, k) for k = 0..(m-1)/2
    row = np.array([r_c])
    m = 1
    while True:
        for k, w in enumerate(row):
            terms.append(SeriesTerm(m, k, m - 2 * k, float(w)))
        if m >= m_max:
            break
        k = np.arange(row.size, dtype=float)
        nxt = np.empty(row.size + 1)
        nxt[1:] = row * r_c * r_c * m * m / (4.0 * (k + 1) * (m - k + 1))
        nxt[0] = nxt[1] / (m + 2)
        row = nxt
        m += 2
    return terms, m_max


def laguerre_assoc(j: int, n: int, x):
    """Associated Laguerre polynomial L_n^j(x) by upward recurrence in n."""
    if j < 0 or n < 0:
        raise ValueError("j and n must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + j - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + j - x) * cur - (k + j) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def _eps_sigma(mu, weight, eta0):
    gauss = np.exp(-0.5 * (eta0 * mu) ** 2)
    wg = weight * gauss
    eps = float(np.dot(wg, mu))
    sigma = -0.5 * eta0 * eta0 * float(np.dot(wg, mu ** 3))
    return eps, sigma


def expand(r_c: float, eta0: float, tol: float = DEFAULT_TOL,
           m_cap: int = DEFAULT_M_CAP) -> CouplingExpansion:
    mu, weight, m_max, tail = harmonic_weights(float(r_c), float(tol), int(m_cap))
    eps, sig = _eps_sigma(mu, weight, eta0)
    return CouplingExpansion(float(r_c), float(eta0), float(tol), m_max, mu, weight,
                             eps, sig, tail)


def epsilon_sigma(r_c: float, eta0: float, tol: float = DEFAULT_TOL) -> Tuple[float, float]:
    """Linear coefficients of f(n_b) ~ epsilon + sigma * n_b (sigma <= 0)."""
    exp_ = expand(r_c, eta0, tol)
    return exp_.epsilon, exp_.sigma


def f_j(j: int, n_b: int, expansion: CouplingExpansion) -> float:
    """Nonlinearity function for j-phonon sideband coupling at phonon number n_b."""
    if j < 0 or n_b < 0:
        raise ValueError("j and n_b must be non-negative")
    mu = expansion.mu
    if mu.size == 0:
        return 0.0
    x = (expansion.eta0 * mu) ** 2
    # n_b! / (n_b + j)!
    ratio = 1.0 / math.prod(range(n_b + 1, n_b + j + 1))
    lag = laguerre_assoc(j, n_b, x)
    return float(np.sum(expansion.weight * np.exp(-0.5 * x) * ratio * mu ** j * lag))


def omega_c_closed(x, r_c: float, L: float, wavelength: float):
    c = CONSTANTS.c_light
    phase = 4 * np.pi * np.asarray(x, dtype=float) / wavelength
    return c / L * np.arccos(r_c * np.cos(phase))


def omega_c_series(x, expansion: CouplingExpansion, L: float, wavelength: float):
    c = CONSTANTS.c_light
    x = np.asarray(x, dtype=float)
    phase = 4 * np.pi * x / wavelength
    if expansion.mu.size == 0:
        return np.full_like(x, np.pi * c / (2 * L))[()]
    harmonics = np.cos(np.multiply.outer(phase, expansion.mu)) @ expansion.weight
    # (c / 2L) * sum w * 2 cos(mu phase)
    return (np.pi * c / (2 * L) - c / L * harmonics)[()]
