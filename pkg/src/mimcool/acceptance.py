"""Acceptance checks shared by ``mimcool validate`` and the test suite.

Every check returns a :class:`Check`; nothing here raises on a failed
comparison, so a report can always be assembled in full.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import cooling, coupling, presets, response
from .errors import MimcoolError
from .params import SystemConfig, derive, thermal_occupancy
from .steady_state import (LinearizedParams, build_fluctuation_model, eigen_stability,
                           hurwitz_determinant, linearize, routh_hurwitz, steady_state_at)

REFERENCE_NBAR = 83306.0


@dataclass(frozen=True)
class Check:
    criterion: int  # 0 for supplementary checks
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        label = f"criterion {self.criterion:>2}" if self.criterion else "supplementary"
        text = f"{tag} {label} {self.name}: value={self.value:.6g} tol={self.tolerance:.6g}"
        return text + (f" ({self.detail})" if self.detail else "")


def _below(criterion, name, value, tol, detail=""):
    return Check(criterion, name, bool(value <= tol), float(value), float(tol), detail)


def _rel(a, b):
    return abs(a - b) / abs(b)


# -- shared helpers -----------------------------------------------------------------

def linearized_at(config: SystemConfig, delta: float, tol=coupling.DEFAULT_TOL):
    """(steady state, linearized parameters) at effective detuning ``delta`` (rad/s)."""
    derived = derive(config)
    exp_ = coupling.expand(config.reflectivity, derived.eta0, tol)
    ss = steady_state_at(derived, exp_.epsilon, exp_.sigma, delta)
    return ss, linearize(ss, derived, exp_.epsilon, exp_.sigma)


def sigma_free(lp: LinearizedParams, omega_m: float, coupling_mag: float) -> LinearizedParams:
    """Same optics and coupling magnitude with every sigma-induced shift removed.

    Setting sigma = 0 literally also changes the intracavity field (and makes
    the cantilever preset unstable), so the regime is defined by its effect on
    the linear model: bare frequencies and dampings, and a real coupling.
    """
    return replace(lp, Omega_m=omega_m, Omega1=omega_m, Omega2=omega_m,
                   Gamma1=lp.gamma, Gamma2=lp.gamma, G_R=coupling_mag, G_I=0.0)


def random_linearized(rng) -> LinearizedParams:
    """Random linearized system in units of omega_m, magnitudes log-uniform."""
    def logu(lo, hi):
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    gamma = logu(1e-6, 1e-1)
    kappa = logu(1e-2, 1.0)
    delta = logu(1e-2, 3.0) * rng.choice([-1.0, 1.0])
    split_w = logu(1e-4, 0.3) * rng.choice([-1.0, 1.0])
    # Gamma1 + Gamma2 = 2 gamma holds for every physical linearization
    split_g = gamma * rng.uniform(-0.99, 0.99)
    g_mag = logu(1e-3, 2.0)
    phase = rng.uniform(-0.3, 0.3)
    omega_m = 1.0 - 2 * split_w
    return LinearizedParams(
        Omega_m=omega_m, Omega1=omega_m + split_w, Omega2=omega_m - split_w,
        Gamma1=gamma + split_g, Gamma2=gamma - split_g,
        G_R=g_mag * math.cos(phase), G_I=g_mag * math.sin(phase),
        delta=delta, kappa=kappa, gamma=gamma, nbar=logu(1e-2, 1e5))


def cooling_sweep(config: SystemConfig, deltas: Sequence[float],
                  methods=("lyapunov", "closed_form")):
    """Cooling reports along an effective-detuning grid (rad/s); failures give None."""
    out = []
    for d in deltas:
        try:
            out.append(cooling.cooling_report(config, d, methods=methods))
        except MimcoolError:
            out.append(None)
    return out


def sweep_minimum(reports):
    """Report with the smallest n_eff among stable points, or None."""
    usable = [r for r in reports if r is not None and r.stable and not math.isnan(r.n_eff)]
    return min(usable, key=lambda r: r.n_eff) if usable else None


def cooling_grid(config: SystemConfig, points: int = presets.COOLING_POINTS):
    return np.linspace(*presets.COOLING_DELTA, points) * config.mech_freq


# -- criteria -------------------------------------------------------------------------

def check_thermal_occupancy() -> Check:
    nbar = thermal_occupancy(2 * math.pi * 1e5, 0.4)
    return _below(1, "thermal_occupancy", _rel(nbar, REFERENCE_NBAR), 1e-3,
                  f"nbar={nbar:.1f}")


def check_series_identity(rng, config: SystemConfig = presets.SECTION5) -> List[Check]:
    coupling.harmonic_weights.cache_clear()
    start = time.perf_counter()
    L, lam = config.cavity_length, config.wavelength
    omega0 = math.pi * 2.99792458e8 / (2 * L)
    worst = 0.0
    for r_c in (0.1, 0.5, 0.9, 0.999):
        exp_ = coupling.expand(r_c, 0.0)
        x = rng.uniform(0.0, lam, 200)
        diff = coupling.omega_c_series(x, exp_, L, lam) - coupling.omega_c_closed(x, r_c, L, lam)
        worst = max(worst, float(np.max(np.abs(diff))) / omega0)
    elapsed = time.perf_counter() - start
    return [_below(2, "series_identity", worst, 1e-10),
            _below(2, "series_identity_runtime_s", elapsed, 1.0)]


def check_laguerre_epsilon(rng, draws: int = 100) -> Check:
    worst = 0.0
    for _ in range(draws):
        r_c = float(rng.uniform(0.05, 0.9999))
        eta0 = float(np.exp(rng.uniform(np.log(1e-9), np.log(1e-4))))
        exp_ = coupling.expand(r_c, eta0)
        worst = max(worst, _rel(coupling.f_j(1, 0, exp_), exp_.epsilon))
    return _below(3, "laguerre_epsilon", worst, 1e-12, f"{draws} draws")


def check_uncoupled(config: SystemConfig, quadrature_tol=1e-6) -> Check:
    undriven = config.replace(input_power=0.0)
    rep = cooling.cooling_report(undriven, config.mech_freq, quadrature_tol=quadrature_tol)
    target = derive(undriven).nbar + 0.5
    values = list(rep.var_q.values()) + list(rep.var_p.values())
    worst = max((_rel(v, target) for v in values), default=math.inf)
    detail = f"{len(rep.var_q)} methods"
    if len(rep.var_q) != 3:
        return Check(4, "uncoupled_limit", False, worst, 1e-9, detail + f"; errors {rep.errors}")
    return _below(4, "uncoupled_limit", worst, 1e-9, detail)


@dataclass
class OracleGrid:
    stable: int
    points: int
    spectral: float
    closed_full: float
    closed_sigma_free: float
    offenders: Dict[str, float]


def oracle_grid(config: SystemConfig, points: int = 50, quadrature_tol=1e-6) -> OracleGrid:
    """Spectral and closed-form variances against Lyapunov on the [0.5, 1.5] w_m grid."""
    omega_m = config.mech_freq
    res = OracleGrid(0, points, 0.0, 0.0, 0.0, {})
    for delta in np.linspace(0.5, 1.5, points) * omega_m:
        ss, lp = linearized_at(config, delta)
        regimes = [("full", lp), ("sigma_free", sigma_free(lp, omega_m, abs(ss.G)))]
        for label, model_lp in regimes:
            if not routh_hurwitz(model_lp)[2]:
                continue
            V = cooling.variances_lyapunov(build_fluctuation_model(model_lp))
            cq, cp = cooling.variances_closed(model_lp)
            err = max(_rel(cq, V[2, 2]), _rel(cp, V[3, 3]))
            if label == "full":
                res.stable += 1
                res.closed_full = max(res.closed_full, err)
                q = cooling.variance_q_spectral(model_lp, quadrature_tol)
                res.spectral = max(res.spectral, _rel(q, V[2, 2]))
            else:
                res.closed_sigma_free = max(res.closed_sigma_free, err)
            for diag in cooling.diagnose_closed_form(model_lp):
                res.offenders[diag.name] = max(res.offenders.get(diag.name, 0.0), diag.rel_error)
    return res


def check_oracles(config: SystemConfig, points: int = 50, quadrature_tol=1e-6) -> List[Check]:
    grid = oracle_grid(config, points, quadrature_tol)
    named = " ".join(f"{k}={v:.2e}" for k, v in sorted(grid.offenders.items()))
    checks = [
        Check(5, "stable_points", grid.stable > 0, grid.stable, points,
              "stable points on the grid"),
        _below(5, "spectral_vs_lyapunov", grid.spectral, 1e-4),
        _below(6, "closed_vs_lyapunov_sigma_free", grid.closed_sigma_free, 1e-6),
        _below(6, "closed_vs_lyapunov_full", grid.closed_full, 1e-6),
        Check(6, "offending_coefficients", not grid.offenders, len(grid.offenders), 0,
              ("offending: " + named) if named else "none"),
    ]
    return checks


def stability_draws(rng, count: int = 1000, margin: float = 1e-6):
    """(mismatches, draws used, draws excluded) of Routh-Hurwitz vs eigenvalues."""
    mismatches = used = 0
    for _ in range(count):
        lp = random_linearized(rng)
        max_re, stable_eig = eigen_stability(build_fluctuation_model(lp).A)
        if abs(max_re) < margin:
            continue
        used += 1
        if routh_hurwitz(lp)[2] != stable_eig:
            mismatches += 1
    return mismatches, used, count - used


def check_stability(rng, count: int = 1000) -> List[Check]:
    start = time.perf_counter()
    mismatches, used, skipped = stability_draws(rng, count)
    elapsed = time.perf_counter() - start
    return [Check(7, "routh_hurwitz_vs_eigen", mismatches == 0 and used > 0, mismatches, 0,
                  f"{used} draws compared, {skipped} marginal excluded"),
            _below(7, "stability_runtime_s", elapsed, 10.0)]


def check_ground_state(config: SystemConfig, points: int = presets.COOLING_POINTS) -> List[Check]:
    best = sweep_minimum(cooling_sweep(config, cooling_grid(config, points)))
    if best is None:
        return [Check(8, "min_n_eff", False, math.inf, 1.0, "no stable point")]
    vq, vp = best.var_q["lyapunov"], best.var_p["lyapunov"]
    where = f"at delta={best.delta / config.mech_freq:.3f} w_m"
    return [
        _below(8, "min_n_eff", best.n_eff, 1.0, where),
        _below(8, "equipartition_at_min", abs(vq - vp) / (vq + vp), 0.1,
               f"var_q={vq:.4g} var_p={vp:.4g} {where}"),
        _below(8, "min_T_eff_K", best.T_eff, 10e-6, where),
    ]


def reflectivity_minima(config: SystemConfig, points: int = presets.COOLING_POINTS):
    grid = cooling_grid(config, points)
    out = []
    for r_c in presets.COOLING_REFLECTIVITIES:
        best = sweep_minimum(cooling_sweep(config.replace(reflectivity=r_c), grid))
        out.append(math.inf if best is None else best.n_eff)
    return out


def check_reflectivity_trend(config: SystemConfig,
                             points: int = presets.COOLING_POINTS) -> Check:
    minima = reflectivity_minima(config, points)
    ok = all(a > b for a, b in zip(minima, minima[1:]))
    detail = ", ".join(f"r_c={r}: {n:.4g}" for r, n in zip(presets.COOLING_REFLECTIVITIES, minima))
    return Check(9, "n_eff_decreasing_in_r_c", ok, minima[-1], minima[0], detail)


def ldp_damping(config: SystemConfig = presets.FIG3):
    values = []
    for scale in presets.FIG3_SCALES:
        cfg = config.replace(ldp_scale=scale)
        _, lp = linearized_at(cfg, cfg.mech_freq)
        values.append(float(response.effective_damping(cfg.mech_freq, lp)))
    return values


def check_ldp_trend(config: SystemConfig = presets.FIG3) -> Check:
    values = ldp_damping(config)
    gamma = config.gamma
    ok = all(b > a for a, b in zip(values, values[1:]))
    detail = ", ".join(f"scale {s}: {v / gamma:.6g} gamma" for s, v in zip(presets.FIG3_SCALES,
                                                                           values))
    return Check(10, "gamma_eff_increasing_in_ldp", ok, values[-1], values[0], detail)


def check_determinism(names: Optional[Sequence[str]] = None,
                      render: Optional[Callable[[str, int], str]] = None) -> Check:
    """Byte-compare figure CSVs across two runs and thread counts 1 and 8."""
    if render is None:
        from .cli import render_figure as render
    names = list(names or presets.FIGURES)
    differing = []
    for name in names:
        first = render(name, 1)
        if render(name, 1) != first or render(name, 8) != first:
            differing.append(name)
    return Check(11, "figure_determinism", not differing, len(differing), 0,
                 ("differing: " + " ".join(differing)) if differing else ", ".join(names))


# -- supplementary -----------------------------------------------------------------------

def check_decomposition(config: SystemConfig) -> List[Check]:
    _, lp = linearized_at(config, config.mech_freq)
    grid = np.linspace(1e-3, 2.0, 1000) * config.mech_freq
    fr, dr = response.decomposition_residuals(grid, lp)
    return [_below(0, "effective_frequency_decomposition", fr, 1e-9),
            _below(0, "effective_damping_decomposition", dr, 1e-9)]


def correction_effects(rng):
    """Effect of omitting each switchable correction on a random stable system.

    Rows of (name, switchable, effect, printed, corrected); ``effect`` is the
    largest relative disagreement the printed variant causes against its oracle.
    """
    while True:
        lp = replace(random_linearized(rng), n_th=0.25)
        if routh_hurwitz(lp)[2] and eigen_stability(build_fluctuation_model(lp).A)[1]:
            break
    model = build_fluctuation_model(lp)
    V = cooling.variances_lyapunov(model)
    grid = np.linspace(1e-3, 2, 400)
    rows = []
    for name, corr in sorted(cooling.CORRECTIONS.items()):
        if not corr.switchable:
            rows.append((name, False, None, corr.printed, corr.corrected))
            continue
        rest = cooling.ALL_CORRECTIONS - {name}
        effects = []
        try:
            cq, cp = cooling.variances_closed(lp, rest)
            effects.append(max(_rel(cq, V[2, 2]), _rel(cp, V[3, 3])))
        except MimcoolError:
            effects.append(math.inf)
        try:
            effects.append(_rel(cooling.variance_q_spectral(lp, corrections=rest), V[2, 2]))
        except MimcoolError:
            effects.append(math.inf)
        if name == "damping_w2_term":
            effects.append(response.decomposition_residuals(grid, lp, printed_damping=True)[1])
        if name == "noise_y_quadrature":
            Vp = cooling.solve_lyapunov(model.A, cooling.diffusion_matrix(lp, rest))
            effects.append(max(_rel(Vp[2, 2], V[2, 2]), _rel(Vp[3, 3], V[3, 3])))
        if name in ("m2_gamma_sq", "m2_coupling_prefactor"):
            m2 = 4 * lp.kappa * lp.gamma * cooling._m2_partial(lp, rest)
            effects.append(_rel(m2, hurwitz_determinant(lp)))
        rows.append((name, True, max(effects), corr.printed, corr.corrected))
    return rows


def run_all(config: SystemConfig = presets.SECTION5, *, seed: int = 12345, points: int = 50,
            draws: int = 1000, sweep_points: int = presets.COOLING_POINTS,
            figures: Optional[Sequence[str]] = None, quadrature_tol=1e-6) -> List[Check]:
    """Criteria 1-11 plus supplementary checks, in order."""
    rng = np.random.default_rng(seed)
    checks = [check_thermal_occupancy()]
    checks += check_series_identity(rng, config)
    checks.append(check_laguerre_epsilon(rng))
    checks.append(check_uncoupled(config, quadrature_tol))
    checks += check_oracles(config, points, quadrature_tol)
    checks += check_stability(rng, draws)
    checks += check_ground_state(config, sweep_points)
    checks.append(check_reflectivity_trend(config, sweep_points))
    checks.append(check_ldp_trend())
    checks.append(check_determinism(figures))
    checks += check_decomposition(config)
    return checks
