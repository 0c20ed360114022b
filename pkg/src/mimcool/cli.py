"""Command line front end: single reports, sweeps, figure tables and validation.

Exit codes: 0 success, 1 validation failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import acceptance, cooling, coupling, presets, response
from .errors import ConfigError, MimcoolError
from .params import SystemConfig, derive
from .presets import FIGURES, SweepSpec
from .steady_state import linearize, steady_state_at

log = logging.getLogger("mimcool")

METHODS = ("closed_form", "lyapunov", "spectral")
REPORT_HEADER = (
    ["delta_over_wm", "ldp_scale", "r_c"]
    + [f"var_q_{m}" for m in METHODS] + [f"var_p_{m}" for m in METHODS]
    + ["n_eff", "T_eff", "M1", "M2", "max_re_eig", "consistency",
       "delta0_over_wm", "stable", "status"]
)
RESPONSE_HEADER = ["omega_over_wm", "omega_eff_over_wm", "gamma_eff_over_gamma", "ldp_scale"]
COUPLING_HEADER = ["n_b", "f", "f_linear", "r_c", "eta0"]


class InputError(Exception):
    """Bad command line input; maps to exit code 2."""


# -- CSV ------------------------------------------------------------------------

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if math.isnan(value) else format(value, ".17g")
    return str(value)


def emit_csv(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


# -- evaluation -------------------------------------------------------------------

def report_row(config: SystemConfig, delta: float, bare: bool, methods, tol, quad_tol):
    """One CSV row for the cooling pipeline; failures become status text, not exceptions."""
    omega_m = config.mech_freq
    head = [delta / omega_m, config.ldp_scale, config.reflectivity]
    try:
        rep = cooling.cooling_report(config, delta, bare=bare, quadrature_tol=quad_tol,
                                     tol=tol, methods=methods)
    except MimcoolError as exc:
        return head + [None] * (len(REPORT_HEADER) - 5) + [False, f"error:{type(exc).__name__}"]
    head[0] = rep.delta / omega_m
    values = [rep.var_q.get(m) for m in METHODS] + [rep.var_p.get(m) for m in METHODS]
    if not rep.stable:
        status = "unstable"
    elif rep.errors:
        status = "partial:" + "|".join(sorted(rep.errors))
    else:
        status = "ok"
    return head + values + [
        rep.n_eff, rep.T_eff, rep.M1, rep.M2, rep.max_re_eig, rep.consistency,
        rep.delta0 / omega_m, rep.stable, status]


def _parallel(fn, tasks: List, threads: int):
    if threads <= 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map keeps grid order regardless of completion order
        return list(pool.map(lambda t: fn(*t), tasks))


def cooling_rows(config, deltas, bare, methods, tol, quad_tol, threads):
    tasks = [(config, d, bare, methods, tol, quad_tol) for d in deltas]
    return _parallel(report_row, tasks, threads)


def response_rows(config: SystemConfig, delta: float, omegas, tol) -> List[list]:
    derived = derive(config)
    exp_ = coupling.expand(config.reflectivity, derived.eta0, tol)
    ss = steady_state_at(derived, exp_.epsilon, exp_.sigma, delta)
    lp = linearize(ss, derived, exp_.epsilon, exp_.sigma)
    w2 = response.effective_frequency_sq(omegas, lp)
    damp = response.effective_damping(omegas, lp)
    # negative w_eff^2 is reported as a signed root
    w_eff = np.sign(w2) * np.sqrt(np.abs(w2))
    return [[w / config.mech_freq, we / config.mech_freq, ge / derived.gamma, config.ldp_scale]
            for w, we, ge in zip(omegas, w_eff, damp)]


def coupling_rows(config: SystemConfig, nb_max: int, tol, j: int = 1) -> List[list]:
    derived = derive(config)
    exp_ = coupling.expand(config.reflectivity, derived.eta0, tol)
    return [[n, coupling.f_j(j, n, exp_), exp_.f_linear(n), config.reflectivity, derived.eta0]
            for n in range(nb_max + 1)]


def sweep_rows(config: SystemConfig, spec: SweepSpec, delta, bare, methods, tol, quad_tol,
               threads):
    values = spec.values()
    if spec.axis == "delta":
        return cooling_rows(config, values * config.mech_freq, bare, methods, tol, quad_tol,
                            threads)
    field = {"ldp_scale": "ldp_scale", "reflectivity": "reflectivity",
             "temperature": "bath_temperature", "power": "input_power"}[spec.axis]
    tasks = [(config.replace(**{field: float(v)}), delta, bare, methods, tol, quad_tol)
             for v in values]
    rows = _parallel(report_row, tasks, threads)
    if spec.axis in ("temperature", "power"):
        rows = [[v] + r for v, r in zip(values, rows)]
    return rows


def figure_table(name: str, points: Optional[int], methods, tol, quad_tol, threads):
    preset = FIGURES[name]
    rows: List[list] = []
    if preset.kind == "nonlinearity":
        nb_max = presets.NB_MAX if points is None else points - 1
        return COUPLING_HEADER, coupling_rows(preset.config, nb_max, tol)
    if preset.kind == "response":
        npts = points or response.DEFAULT_GRID_POINTS
        omegas = response.frequency_grid(preset.config.mech_freq, npts)
        for field, value in preset.series:
            cfg = preset.config.replace(**{field: value})
            rows += response_rows(cfg, cfg.mech_freq, omegas, tol)
        return RESPONSE_HEADER, rows
    spec = preset.sweep
    if points is not None:
        spec = replace(spec, points=points)
    for field, value in preset.series:
        cfg = preset.config.replace(**{field: value})
        rows += sweep_rows(cfg, spec, None, False, methods, tol, quad_tol, threads)
    return REPORT_HEADER, rows


def gnuplot_script(csv_path: str, header: Sequence[str], x_col: str, y_col: str,
                   group_col: Optional[str], title: str) -> str:
    xi = header.index(x_col) + 1
    yi = header.index(y_col) + 1
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{x_col}'",
        f"set ylabel '{y_col}'",
    ]
    if group_col is None:
        lines.append(f"plot '{csv_path}' using {xi}:{yi} with lines")
    else:
        gi = header.index(group_col) + 1
        lines.append(f"groups = system(\"tail -n +2 {csv_path} | cut -d, -f{gi} | sort -u\")")
        lines.append(f"plot for [g in groups] '{csv_path}' using {xi}:(column({gi}) == g+0 ? "
                     f"column({yi}) : 1/0) with lines title '{group_col}='.g")
    return "\n".join(lines) + "\n"


# -- validation ---------------------------------------------------------------------

def render_figure(name: str, threads: int = 1, points: Optional[int] = None,
                  methods=("lyapunov", "closed_form"), tol=coupling.DEFAULT_TOL,
                  quad_tol=1e-6) -> str:
    """CSV text of a figure table, exactly as ``mimcool figure`` writes it."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        header, rows = figure_table(name, points, methods, tol, quad_tol, threads)
    return emit_csv(rows, header)


def validate(config: SystemConfig, points: int = 50, seed: int = 12345):
    """Acceptance checks on ``config`` plus the correction ledger.

    Returns ``(checks, ledger)`` as CSV-ready rows.
    """
    checks = acceptance.run_all(config, seed=seed, points=points)
    rows = [(c.criterion, c.name, "pass" if c.passed else "fail", c.value, c.tolerance, c.detail)
            for c in checks]
    ledger = acceptance.correction_effects(np.random.default_rng(seed))
    return rows, ledger


# -- argument handling ----------------------------------------------------------------

def _load_config(args) -> SystemConfig:
    if args.config:
        try:
            return SystemConfig.from_json(Path(args.config))
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from None
    return presets.CONFIGS[args.preset]


def _methods(text: str):
    names = METHODS if text == "all" else tuple(m.strip() for m in text.split(",") if m.strip())
    unknown = [m for m in names if m not in METHODS]
    if unknown or not names:
        raise InputError(f"unknown method(s): {', '.join(unknown) or '(none)'}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimcool", description="Back-action cooling calculator for a membrane in a cavity")
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="JSON file with SystemConfig fields (SI units)")
    src.add_argument("--preset", choices=sorted(presets.CONFIGS), default="section5",
                     help="built-in parameter set (default: section5)")
    common.add_argument("--tol", type=float, default=coupling.DEFAULT_TOL,
                        help="relative truncation tolerance of the detuning series")
    common.add_argument("--quad-tol", type=float, default=1e-6,
                        help="relative tolerance of the spectral quadrature")
    common.add_argument("--points", type=int, help="number of grid points")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--output", "-o", help="write CSV here instead of standard output")
    common.add_argument("--gnuplot", help="also write a gnuplot script to this path")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("report", parents=[common], help="all variance methods at one detuning")
    p.add_argument("--delta", type=float,
                   help="effective detuning / w_m (default: the config's bare detuning)")
    p.add_argument("--methods", default="all")

    p = sub.add_parser("sweep", parents=[common], help="cooling report along one axis")
    p.add_argument("--axis", choices=SweepSpec.AXES, default="delta")
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.add_argument("--delta", type=float, default=1.0,
                   help="detuning / w_m held fixed for non-detuning axes")
    p.add_argument("--sweep-bare", action="store_true",
                   help="interpret detunings as bare rather than effective")
    p.add_argument("--methods", default="all")

    p = sub.add_parser("figure", parents=[common], help="tables behind the standard figures")
    p.add_argument("name", choices=sorted(FIGURES))
    p.add_argument("--methods", default="lyapunov,closed_form",
                   help="variance methods for cooling figures ('all' adds quadrature)")

    p = sub.add_parser("coupling", parents=[common], help="f(n_b) table")
    p.add_argument("--nb-max", type=int, default=presets.NB_MAX)
    p.add_argument("--j", type=int, default=1, help="sideband order")

    p = sub.add_parser("response", parents=[common], help="effective frequency and damping table")
    p.add_argument("--delta", type=float, default=1.0, help="effective detuning / w_m")

    sub.add_parser("validate", parents=[common], help="oracle cross-checks and correction ledger")
    return parser


def _write(args, text: str):
    if args.output:
        Path(args.output).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def _maybe_gnuplot(args, header, x_col, y_col, group_col, title):
    if args.gnuplot:
        target = args.output or "data.csv"
        Path(args.gnuplot).write_text(gnuplot_script(target, header, x_col, y_col, group_col,
                                                     title))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        if args.points is not None and args.points < 2:
            raise InputError("--points must be >= 2")
        if args.tol <= 0 or args.quad_tol <= 0:
            raise InputError("tolerances must be > 0")
        return _dispatch(args)
    except (InputError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "figure":
        methods = _methods(args.methods)
        _write(args, render_figure(args.name, args.threads, args.points, methods, args.tol,
                                   args.quad_tol))
        preset = FIGURES[args.name]
        header = RESPONSE_HEADER if preset.kind == "response" else (
            COUPLING_HEADER if preset.kind == "nonlinearity" else REPORT_HEADER)
        x_col = {"nonlinearity": "n_b", "response": "omega_over_wm"}.get(preset.kind,
                                                                        "delta_over_wm")
        group = None if preset.kind == "nonlinearity" else (
            "r_c" if preset.series[0][0] == "reflectivity" else "ldp_scale")
        _maybe_gnuplot(args, header, x_col, preset.quantity, group, preset.description)
        return 0

    config = _load_config(args)
    if args.command == "report":
        methods = _methods(args.methods)
        if args.delta is None:
            row = report_row(config, config.bare_detuning, True, methods, args.tol, args.quad_tol)
        else:
            row = report_row(config, args.delta * config.mech_freq, False, methods, args.tol,
                             args.quad_tol)
        _write(args, emit_csv([row], REPORT_HEADER))
        return 0
    if args.command == "sweep":
        spec = SweepSpec(args.axis, args.start, args.stop, args.points or 101, args.log)
        rows = sweep_rows(config, spec, args.delta * config.mech_freq, args.sweep_bare,
                          _methods(args.methods), args.tol, args.quad_tol, args.threads)
        header = REPORT_HEADER
        if args.axis in ("temperature", "power"):
            header = [args.axis] + REPORT_HEADER
        _write(args, emit_csv(rows, header))
        x_col = {"delta": "delta_over_wm", "ldp_scale": "ldp_scale",
                 "reflectivity": "r_c"}.get(args.axis, args.axis)
        _maybe_gnuplot(args, header, x_col, "n_eff", None, f"n_eff vs {args.axis}")
        return 0
    if args.command == "coupling":
        if args.nb_max < 0 or args.j < 0:
            raise InputError("--nb-max and --j must be >= 0")
        rows = coupling_rows(config, args.nb_max, args.tol, args.j)
        _write(args, emit_csv(rows, COUPLING_HEADER))
        _maybe_gnuplot(args, COUPLING_HEADER, "n_b", "f", None, "f(n_b)")
        return 0
    if args.command == "response":
        omegas = response.frequency_grid(config.mech_freq,
                                         args.points or response.DEFAULT_GRID_POINTS)
        rows = response_rows(config, args.delta * config.mech_freq, omegas, args.tol)
        _write(args, emit_csv(rows, RESPONSE_HEADER))
        _maybe_gnuplot(args, RESPONSE_HEADER, "omega_over_wm", "gamma_eff_over_gamma", None,
                       "effective damping")
        return 0
    if args.command == "validate":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            checks, ledger = validate(config, args.points or 50)
        text = emit_csv(checks, ["criterion", "check", "result", "value", "tolerance", "detail"])
        text += "\r\n" + emit_csv(ledger, ["correction", "switchable", "effect_if_omitted",
                                           "printed", "corrected"])
        _write(args, text)
        return 0 if all(c[2] == "pass" for c in checks) else 1
    raise InputError(f"unknown command {args.command}")


def main():
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error for us
        sys.stderr.close()
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
