"""Configuration-driven command line emitting diffable CSV reports.

Subcommands: ``check`` (hypoellipticity), ``parametrix`` (lambda sweep),
``calc`` (functional-calculus report), ``bip`` (imaginary powers).  Exit
codes: 0 success, 1 usage/config error, 2 mathematical-check failure,
3 numerical failure.  Reruns with the same config are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .config import build_function_family, load_config, resolve_config
from .densela import operator_norm
from .errors import ConfigError, ContourError, SectorcalcError, SingularOperatorError
from .funcalc import build_contour, f_of_operator_oracle, f_of_symbol
from .hypo import check_spectrum, estimate_hypo_constants
from .parametrix import ParametrixCalculator, parametrix_sweep
from .quantop import quantize

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK_FAILED = 2
EXIT_NUMERICAL = 3


def _say(args, message):
    if args.verbose:
        print(message, file=sys.stderr)


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _run_base_check(rc, args):
    report = check_spectrum(rc.base_expr, rc.sector, rc.hypo_c, rc.hypo_C,
                            rc.grid, rc.class_params)
    if report.passed:
        estimate_hypo_constants(rc.base_expr, rc.sector, rc.grid, rc.class_params,
                                report, max_order=rc.hypo_max_order)
    return report


def cmd_check(rc, args):
    report = _run_base_check(rc, args)
    report.to_csv(_out_path(args, "hypo_report.csv"))
    with open(_out_path(args, "hypo_summary.txt"), "w") as fh:
        fh.write(report.summary_text() + "\n")
    print(report.summary_text())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _make_calculator(rc):
    return ParametrixCalculator(rc.expr, rc.grid, rc.class_params, rc.sector,
                                rc.parametrix_N, C=rc.hypo_C)


def cmd_parametrix(rc, args):
    base = check_spectrum(rc.base_expr, rc.sector, rc.hypo_c, rc.hypo_C,
                          rc.grid, rc.class_params)
    if not base.passed:
        print(f"hypoellipticity check failed upstream "
              f"({base.n_violations} violations); not sweeping")
        return EXIT_CHECK_FAILED
    calc = _make_calculator(rc)
    R = calc.find_R()
    lo = rc.lambda_min if rc.lambda_min > 0 else R
    lo = max(lo, R)
    radii = np.geomspace(lo, rc.lambda_max, rc.lambda_count)
    family = parametrix_sweep(calc, radii, R, tol=rc.parametrix_tol)
    family.to_csv(_out_path(args, "parametrix_sweep.csv"))
    print(f"R = {R!r}")
    for name in sorted(family.slopes):
        print(f"slope[{name}] = {family.slopes[name]!r}")
    return EXIT_OK


def cmd_calc(rc, args):
    if not rc.function_specs:
        raise ConfigError("calc requires a nonempty 'functions' list")
    family = build_function_family(rc.function_specs, n_reg=rc.bip_n_reg)
    calc = _make_calculator(rc)
    A = calc.quantized_symbol
    rows = []
    for f in family:
        _say(args, f"calc: {f.name}")
        f.validate(rc.sector)
        per_decade = rc.contour_nodes_per_decade or None
        contour = build_contour(rc.sector, d=f.d, tol=rc.calc_quad_tol, c_f=f.c_f,
                                nodes_per_decade=per_decade)
        fa = f_of_symbol(calc, f, contour, tol=rc.parametrix_tol)
        oracle = f_of_operator_oracle(A, f, contour)
        sup = f.sup_norm(rc.sector)
        op_norm_oracle = operator_norm(oracle)
        q_fa = quantize(fa).matrix
        discrepancy = operator_norm(q_fa - oracle) / op_norm_oracle
        rows.append((f.name, sup, op_norm_oracle, operator_norm(q_fa),
                     op_norm_oracle / sup, discrepancy))
    M = max(row[4] for row in rows)
    with open(_out_path(args, "fcalc_report.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "sup_norm", "op_norm_oracle", "op_norm_symbol",
                         "ratio", "discrepancy"])
        for name, sup, opo, ops, ratio, disc in rows:
            writer.writerow([name, repr(sup), repr(opo), repr(ops),
                             repr(ratio), repr(disc)])
        writer.writerow(["M", "", "", "", repr(M), ""])
    print(f"M = {M!r} over {len(rows)} functions")
    return EXIT_OK


def cmd_bip(rc, args):
    calc = _make_calculator(rc)
    A = calc.quantized_symbol
    from .funcalc import imaginary_power_regularized
    ts = np.linspace(-rc.bip_tmax, rc.bip_tmax, rc.bip_steps)
    rows = []
    for t in ts:
        _say(args, f"bip: t={t!r}")
        f = imaginary_power_regularized(float(t), rc.bip_n_reg)
        f.ensure_cf(rc.sector)
        contour = build_contour(rc.sector, d=1.0, tol=rc.bip_quad_tol, c_f=f.c_f)
        rows.append((float(t), operator_norm(f_of_operator_oracle(A, f, contour))))
    rate = float(np.polyfit(np.abs([r[0] for r in rows]),
                            np.log([r[1] for r in rows]), 1)[0])
    with open(_out_path(args, "imaginary_powers.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "op_norm"])
        for t, nrm in rows:
            writer.writerow([repr(t), repr(nrm)])
        writer.writerow(["rate", repr(rate)])
        writer.writerow(["theta", repr(rc.sector.theta)])
    print(f"fitted growth rate = {rate!r} (theta = {rc.sector.theta!r})")
    return EXIT_OK


_COMMANDS = {
    "check": cmd_check,
    "parametrix": cmd_parametrix,
    "calc": cmd_calc,
    "bip": cmd_bip,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sectorcalc",
        description="Sectorial functional calculus reports on the discrete torus")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", default=".", help="output directory for CSV reports")
    parser.add_argument("--seed", type=int, default=0,
                        help="reserved; outputs are deterministic and seed-free")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        rc = resolve_config(load_config(args.config))
    except SectorcalcError as exc:
        # parse/validation problems in the config are usage errors
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularOperatorError, ContourError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if "resolvent" in str(exc) or "singular" in str(exc).lower():
            print("hint: a larger shift c may move the spectrum off the contour",
                  file=sys.stderr)
        return EXIT_NUMERICAL
    except SectorcalcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
