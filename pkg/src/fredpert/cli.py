"""Command-line front end.

Subcommands read a JSON problem file (or the name of a bundled problem),
write CSV to ``--out`` or standard output, and optionally a JSON report.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings

import numpy as np
import scipy.integrate

from . import expr as ex
from .bounds import build_report, g_pm
from .catalog import load_problem, names as catalog_names
from .continuation import continue_to, evaluate_series_quiet, uniform_variation
from .exceptions import ConfigurationError, NumericalFailure
from .operators import kernel_norms
from .oracle import direct_solve_at
from .series_engine import OutsideRadiusWarning, evaluate_series, solve_series

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _write_csv(args, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_report(args, report):
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _parse_range(text, what):
    """``a:b:k`` -> ``k`` evenly spaced values from ``a`` to ``b``."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigurationError(f"{what}: expected a:b:k, got {text!r}") from None
    if k < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise ConfigurationError(f"{what}: need finite bounds and k >= 1")
    return np.linspace(a, b, k)


def _note(msg):
    print(msg, file=sys.stderr)


# ----------------------------------------------------------------------------
# subcommands

def cmd_solve(args):
    p = load_problem(args.problem)
    s = solve_series(p, args.order)
    if s.failure:
        raise NumericalFailure(s.failure)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OutsideRadiusWarning)
        approx = evaluate_series(s, args.epsilon)
    for w in caught:
        _note(f"warning: {w.message}")
    direct = direct_solve_at(s.problem, args.epsilon, initial=None if s.problem.is_linear else approx)
    err = np.abs(approx.values - direct.values)
    rows = zip(s.rule.nodes, approx.values, direct.values, err)
    _write_csv(args, ["x", "phi_series", "phi_direct", "abs_err"], rows)
    _write_report(args, {
        "command": "solve", "problem": p.to_dict(), "epsilon": args.epsilon,
        "order": args.order, "max_abs_err": float(err.max()),
        "radius_estimate": s.radius_estimate, "rho": s.rho,
    })
    return EXIT_OK


def cmd_terms(args):
    p = load_problem(args.problem)
    s = solve_series(p, args.order)
    sup, l2 = s.norms("sup"), s.norms("l2")
    rows = []
    for j in range(len(sup)):
        ratio = sup[j] / sup[j - 1] if j and sup[j - 1] > 0 else None
        rows.append((j, sup[j], l2[j], ratio))
    _write_csv(args, ["order", "sup", "l2", "ratio"], rows)
    _write_report(args, {
        "command": "terms", "problem": p.to_dict(), "order": args.order,
        "failure": s.failure, "failed_order": s.failed_order,
        "growth_constant": s.growth_constant(), "rho": s.rho,
    })
    if s.failure:
        _note(s.failure)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_bounds(args):
    p = load_problem(args.problem)
    rep = build_report(p, D=args.D, b=args.b, order=args.order, epsilon=args.epsilon)
    _write_csv(args, ["quantity", "value"], rep.rows())
    _write_report(args, {"command": "bounds", "problem": p.to_dict(), "bounds": rep.as_dict()})
    return EXIT_OK


def _sweep_cell(p, omega, eps, order, tol):
    q = p.replace(omega=float(omega))
    try:
        dp = q.discretize()
        rho = dp.rho() if dp.is_linear else None
        s = solve_series(dp, order)
        if s.failure:
            return rho, s, False, None
        approx = evaluate_series_quiet(s, eps)
        direct = direct_solve_at(dp, eps, initial=None if dp.is_linear else approx)
        err = float(np.max(np.abs(approx.values - direct.values)))
        return rho, s, err <= tol * (1.0 + direct.norm_sup()), err
    except NumericalFailure:
        return None, None, False, None


def cmd_sweep(args):
    p = load_problem(args.problem)
    omegas = _parse_range(args.omega, "--omega")
    epsilons = _parse_range(args.epsilon, "--epsilon")
    rows, cells = [], []
    for om in omegas:
        for eps in epsilons:
            if eps < 0:
                raise ConfigurationError("--epsilon values must be non-negative")
            rho, s, ok, err = _sweep_cell(p, om, eps, args.order, args.tol)
            gm = gp = None
            if s is not None:
                C0 = kernel_norms(s.problem.kernel0).C_sup
                C1 = kernel_norms(s.problem.K1).C_sup
                D = s.growth_constant()
                if D * C1 + 2 * C0 * C0 > 0:
                    roots = g_pm(C0, C1, D)
                    gm, gp = roots if roots is not None else (math.inf, math.inf)
            rows.append((om, eps, rho, gm, gp, ok, err))
            cells.append({"omega": om, "epsilon": eps, "rho": rho, "g_minus": gm,
                          "g_plus": gp, "converged": ok, "abs_err": err})
    _write_csv(args, ["omega", "epsilon", "rho", "g_minus", "g_plus", "converged", "abs_err"], rows)
    _write_report(args, {"command": "sweep", "problem": p.to_dict(), "cells": cells})
    return EXIT_OK


def cmd_continue(args):
    p = load_problem(args.problem)
    res = continue_to(p, args.target, step_fraction=args.step, order=args.order, tol=args.tol)
    radii = {st.base: st.radius for st in res.steps}
    rows = [(i, e, radii.get(e)) for i, e in enumerate(res.partition.points)]
    _write_csv(args, ["index", "epsilon", "radius"], rows)
    _note(f"status: {res.status}")
    _note(f"reached epsilon: {res.reached_epsilon:.17g}")
    if res.final_error is not None:
        _note(f"final error: {res.final_error:.3e}")
    if res.message:
        _note(res.message)
    _write_report(args, {
        "command": "continue", "problem": p.to_dict(), "target": res.target,
        "status": res.status, "reached_epsilon": res.reached_epsilon,
        "partition": list(res.partition.points), "final_error": res.final_error,
        "steps": [{"base": st.base, "radius": st.radius, "step": st.step} for st in res.steps],
        "message": res.message,
    })
    if res.status == "solve failure":
        return EXIT_NUMERICAL
    return EXIT_OK


def _abs_derivative_integral(f):
    d = ex.differentiate(f, "x")
    val, _ = scipy.integrate.quad(lambda t: abs(float(ex.evaluate(d, {"x": t}))),
                                  0.0, 1.0, limit=500, epsabs=1e-13, epsrel=1e-12)
    return val


def cmd_variation(args):
    f = ex.parse(args.fn)
    extra = ex.free_variables(f) - {"x"}
    if extra:
        raise ConfigurationError(f"--fn may only use x, found {sorted(extra)}")
    try:
        grids = [int(g) for g in args.grid.split(",")]
    except ValueError:
        raise ConfigurationError(f"--grid: expected comma-separated integers, got {args.grid!r}") from None
    if any(n < 1 for n in grids):
        raise ConfigurationError("--grid values must be >= 1")
    total = _abs_derivative_integral(f)
    rows = []
    for n in grids:
        v = uniform_variation(f, n)
        rows.append((n, v, total, abs(v - total)))
    _write_csv(args, ["n", "variation", "integral_abs_derivative", "abs_diff"], rows)
    _write_report(args, {"command": "variation", "fn": str(f), "integral_abs_derivative": total,
                         "rows": [dict(zip(("n", "variation", "abs_diff"), (r[0], r[1], r[3]))) for r in rows]})
    return EXIT_OK


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fredpert",
        description="Perturbation series for kernel- and nonlinearity-perturbed integral equations.",
        epilog=f"Bundled problems: {', '.join(catalog_names())}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, problem=True):
        if problem:
            sp.add_argument("--problem", required=True,
                            help="JSON problem file or bundled problem name")
        sp.add_argument("--out", help="CSV output path (default: standard output)")
        sp.add_argument("--report", help="also write a JSON report to this path")

    sp = sub.add_parser("solve", help="series value against a direct solve at one epsilon")
    common(sp)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--order", type=int, default=30)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("terms", help="norms of the series coefficients")
    common(sp)
    sp.add_argument("--order", type=int, default=20)
    sp.set_defaults(func=cmd_terms)

    sp = sub.add_parser("bounds", help="convergence bounds and thresholds")
    common(sp)
    sp.add_argument("--D", type=float, default=None, help="declared growth constant")
    sp.add_argument("--b", type=float, default=None, help="declared derivative constant to check")
    sp.add_argument("--order", type=int, default=20, help="series order used to estimate D")
    sp.add_argument("--epsilon", type=float, default=None, help="evaluate envelopes here")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("sweep", help="convergence atlas over omega and epsilon")
    common(sp)
    sp.add_argument("--omega", required=True, help="a:b:k")
    sp.add_argument("--epsilon", required=True, help="a:b:k")
    sp.add_argument("--order", type=int, default=20)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("continue", help="re-expansion towards a target epsilon")
    common(sp)
    sp.add_argument("--target", type=float, required=True)
    sp.add_argument("--step", type=float, default=0.5, help="fraction of the radius per step")
    sp.add_argument("--order", type=int, default=30)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_continue)

    sp = sub.add_parser("variation", help="discrete variation against the integral of |f'|")
    common(sp, problem=False)
    sp.add_argument("--fn", required=True, help="expression in x")
    sp.add_argument("--grid", default="8,16,32,64", help="comma-separated cell counts")
    sp.set_defaults(func=cmd_variation)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as err:
        _note(f"configuration error: {err}")
        return EXIT_CONFIG
    except NumericalFailure as err:
        _note(f"numerical failure: {err}")
        return EXIT_NUMERICAL
    except (ValueError, OSError) as err:
        _note(f"configuration error: {err}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
