"""Command line front end.

Every command reads a JSON problem file and writes JSON or CSV to stdout.

Exit codes:

    0  success
    1  unexpected internal error
    2  validation failure (a candidate failed its checks, a numerical
       construction did not converge, or ``verify`` found a disagreement)
    3  no optimal stopping time (NoOptimum) or no shooting root (NoRoot);
       the report is still printed
    4  configuration error (bad arguments, unreadable problem file,
       coefficients violating the standing assumptions)

On any nonzero exit a single JSON line ``{"error", "exit", "message"}`` is
written to stderr. ``OPTSTOP_SEED`` sets the default Monte Carlo seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import (
    CoefficientError,
    DomainError,
    NoRoot,
    OptStopError,
    PreconditionError,
    ProblemFileError,
    ShapeError,
    ValidationError,
)
from .funcmodel import ProblemSpec
from .problem_io import load_problem, problem_to_dict
from .values import NoOptimum, OneSidedLeft, OneSidedRight, TwoSided

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_NO_SOLUTION, EXIT_CONFIG = 0, 1, 2, 3, 4


class ConfigError(OptStopError):
    """Bad command line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


class _Exit(Exception):
    """Finish with a report already written and a nonzero code."""

    def __init__(self, code: int, error: str, message: str):
        super().__init__(message)
        self.code, self.error = code, error


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _pair(text: str) -> tuple:
    v = _floats(text)
    if len(v) != 2 or not v[0] < v[1]:
        raise argparse.ArgumentTypeError(f"expected lo,hi with lo < hi, got {text!r}")
    return tuple(v)


def _grid(text: str) -> tuple:
    v = _floats(text)
    if len(v) != 3 or not v[0] < v[1] or v[2] < 2 or v[2] != int(v[2]):
        raise argparse.ArgumentTypeError(f"expected lo,hi,n with lo < hi and n >= 2, got {text!r}")
    return v[0], v[1], int(v[2])


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="optstop", description="Optimal stopping of integral functionals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("classify", help="classify the problem (lambda = 0)")
    c.add_argument("problem")

    s = sub.add_parser("solve", help="solve and print a JSON report")
    s.add_argument("problem")
    s.add_argument("--curve", metavar="OUT.csv", help="write x, V, V' on --grid")
    s.add_argument("--grid", type=_grid, metavar="LO,HI,N")
    s.add_argument("--natural-scale", metavar="OUT.csv", help="write x, p, p' on --grid")
    s.add_argument("--sequence", type=_positive_int, metavar="N",
                   help="list the first N members of the approximating sequence (no-optimum case)")
    s.add_argument("--sequence-mode", choices=("asymptotically-optimal", "pathological"),
                   default="asymptotically-optimal")
    s.add_argument("--x", type=_floats, default=None, metavar="X1,X2,...",
                   help="report V at these points")
    s.add_argument("--window", type=_pair, metavar="LO,HI", help="shooting window (lambda > 0)")
    s.add_argument("--no-validate", action="store_true")

    y = sub.add_parser("payoff", help="payoff of the exit rule from (a, b)")
    y.add_argument("problem")
    y.add_argument("a", type=float)
    y.add_argument("b", type=float)
    y.add_argument("--x", type=_floats, default=None, metavar="X1,X2,...")
    y.add_argument("--tol", type=_positive, default=1e-6, help="oracle agreement tolerance")

    h = sub.add_parser("shoot", help="shooting solver")
    h.add_argument("problem")
    h.add_argument("--window", type=_pair, metavar="LO,HI")
    h.add_argument("--tol", type=_positive, default=1e-12)
    h.add_argument("--dump-trajectory", metavar="OUT.csv", help="write x, V, W on [x1*, x2*]")
    h.add_argument("--no-validate", action="store_true")

    v = sub.add_parser("verify", help="compare the solution with the oracle and/or Monte Carlo")
    v.add_argument("problem")
    v.add_argument("--oracle", action="store_true")
    v.add_argument("--mc", action="store_true")
    v.add_argument("--solution", metavar="REPORT.json",
                   help="boundaries from a previous solve report instead of solving again")
    v.add_argument("--points", type=_positive_int, default=21, help="oracle grid size")
    v.add_argument("--tol", type=_positive, default=1e-6, help="oracle agreement tolerance")
    v.add_argument("--x", type=_floats, default=None, metavar="X1,X2,...", help="MC start points")
    v.add_argument("--paths", type=_positive_int, default=100_000)
    v.add_argument("--step", type=_positive, default=1e-3, help="natural-scale time step")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--umax", type=_positive, default=1e4, help="horizon cap for one-sided rules")
    v.add_argument("--zmax", type=_positive, default=4.0, help="largest accepted |z|")

    u = sub.add_parser("curve", help="CSV of x, V, V' on a grid")
    u.add_argument("problem")
    u.add_argument("--grid", type=_grid, metavar="LO,HI,N")
    return p


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _plain(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    return str(obj)


def _emit_json(doc, out):
    out.write(json.dumps(_plain(doc), indent=2) + "\n")


def _csv_text(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_csv(path: str, header: list, rows):
    with open(path, "w", newline="") as fh:
        fh.write(_csv_text(header, rows))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _default_grid(spec: ProblemSpec, n: int = 201) -> tuple:
    tpl = spec.template
    lo, hi = spec.interval
    a = max(tpl.x1l - tpl.span, lo)
    b = min(tpl.x2r + tpl.span, hi)
    return a, b, n


def _grid_points(spec, grid) -> np.ndarray:
    lo, hi, n = grid or _default_grid(spec)
    return np.linspace(lo, hi, n)


def _center(spec: ProblemSpec) -> float:
    tpl = spec.template
    return 0.5 * (tpl.x1r + tpl.x2l)


def _h_of(spec: ProblemSpec):
    from .htransform import htransform_of
    from .scale import transform_problem

    if spec.lam != 0.0:
        raise PreconditionError("classification applies to lambda = 0 problems")
    natural, t = transform_problem(spec)
    return htransform_of(natural), natural, t


def cmd_classify(spec: ProblemSpec, args, out) -> int:
    from .htransform import classify

    H, _, t = _h_of(spec)
    cl = classify(H)
    doc = {"command": "classify", "problem": spec.name, "scale_mode": t.mode}
    doc.update(cl.as_dict())
    _emit_json(doc, out)
    return EXIT_OK


def _values_at(sol, xs) -> list:
    V = sol.V
    rows = []
    for x in xs:
        rows.append({"x": x, "V": float(V(x)) if V is not None else None})
    return rows


def _sequence_rows(sol, natural, t, n: int, mode: str, xs: list) -> list:
    from .solver import make_sequence

    if not isinstance(sol, NoOptimum):
        raise PreconditionError(f"--sequence needs a problem without an optimum, got {sol.kind}")
    plan = sol.plan if mode == sol.plan.mode else make_sequence(sol.plan.H, mode, sol.classification)

    def back(y):
        if not math.isfinite(y):
            return y
        return float(t.inverse(y))

    rows = []
    for k in range(1, n + 1):
        a, b, c = plan(k)
        payoff = plan.payoff(k)
        rows.append({"n": k, "a": back(a), "b": back(b), "c": c,
                     "payoff": [{"x": x, "U": float(payoff(float(t.p(x))))} for x in xs]})
    return rows


def cmd_solve(spec: ProblemSpec, args, out) -> int:
    from .pipeline import solve_general
    from .scale import transform_problem
    from .shooting import FD_STEP, MARGIN, TOL_AC, TOL_BOUNDARY, TOL_FIT, TOL_ODE

    validate = not args.no_validate
    sol, natural, t = solve_general(spec, validate=validate, window=args.window,
                                    return_transform=True)
    doc = {"command": "solve", "problem": problem_to_dict(spec)}
    doc.update(sol.as_dict())
    doc["tolerances"] = {"residual_ode": TOL_ODE, "smooth_fit": TOL_FIT,
                         "boundary_values": TOL_BOUNDARY, "abs_continuity": TOL_AC,
                         "fd_step": FD_STEP, "inclusion_margin": MARGIN}
    xs = args.x if args.x is not None else [_center(spec)]
    if not (isinstance(sol, NoOptimum) and sol.infinite):
        doc["values"] = _values_at(sol, xs)
    if args.sequence:
        doc["sequence"] = _sequence_rows(sol, natural, t, args.sequence, args.sequence_mode, xs)
    if args.curve:
        if sol.V is None or (isinstance(sol, NoOptimum) and sol.infinite):
            raise PreconditionError("the value function is infinite; no curve to write")
        xg = _grid_points(spec, args.grid)
        _write_csv(args.curve, ["x", "V", "dV"],
                   ((x, sol.V(float(x)), sol.V.derivative(float(x))) for x in xg))
    if args.natural_scale:
        if t is None:
            natural, t = transform_problem(spec)
        xg = _grid_points(spec, args.grid)
        _write_csv(args.natural_scale, ["x", "p", "dp"],
                   ((x, float(t.p(float(x))), float(t.pderiv(float(x)))) for x in xg))
    _emit_json(doc, out)
    if isinstance(sol, NoOptimum):
        raise _Exit(EXIT_NO_SOLUTION, "NoOptimum", "no optimal stopping time exists")
    return EXIT_OK


def cmd_payoff(spec: ProblemSpec, args, out) -> int:
    from .oracle import green_value
    from .solver import payoff_two_sided

    if not args.a < args.b:
        raise ConfigError(f"need a < b, got ({args.a}, {args.b})")
    H, natural, t = _h_of(spec)
    ya, yb = float(t.p(args.a)), float(t.p(args.b))
    P = payoff_two_sided(H, ya, yb)
    xs = args.x if args.x is not None else list(np.linspace(args.a, args.b, 11))
    rows = []
    worst = 0.0
    for x in xs:
        y = float(t.p(x))
        v = float(P(y))
        g = green_value(natural, ya, yb, y)
        worst = max(worst, abs(v - g))
        rows.append({"x": x, "payoff": v, "oracle": g, "absdiff": abs(v - g)})
    doc = {"command": "payoff", "problem": spec.name, "a": args.a, "b": args.b,
           "rows": rows, "max_absdiff": worst, "tol": args.tol, "ok": worst <= args.tol}
    _emit_json(doc, out)
    if worst > args.tol:
        raise _Exit(EXIT_VALIDATION, "OracleMismatch",
                    f"payoff and oracle differ by {worst:.3e} > {args.tol:g}")
    return EXIT_OK


def cmd_shoot(spec: ProblemSpec, args, out) -> int:
    from .shooting import solve_shooting

    sol = solve_shooting(spec, window=args.window, tol=args.tol, validate=not args.no_validate)
    doc = {"command": "shoot", "problem": spec.name}
    doc.update(sol.as_dict())
    if args.dump_trajectory:
        traj = sol.V.traj
        xs = [x for x in traj.nodes if sol.x1s <= x <= sol.x2s]
        xs = sorted(set(xs) | set(np.linspace(sol.x1s, sol.x2s, 201).tolist()))
        _write_csv(args.dump_trajectory, ["x", "V", "W"],
                   ((x, traj.V(x), traj.W(x)) for x in xs))
    _emit_json(doc, out)
    return EXIT_OK


def _solution_for_verify(spec: ProblemSpec, args):
    """Boundaries either from ``--solution`` or from a fresh solve."""
    from .pipeline import solve_general

    if args.solution:
        try:
            with open(args.solution) as fh:
                rep = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read solution report {args.solution}: {exc}")
        variant = rep.get("variant")
        if variant == "TwoSided":
            return "two", float(rep["x1"]), float(rep["x2"])
        if variant == "OneSidedLeft":
            return "left", float(rep["alpha"]), None
        if variant == "OneSidedRight":
            return "right", float(rep["beta"]), None
        raise _Exit(EXIT_NO_SOLUTION, variant or "unknown",
                    f"nothing to verify for a {variant} report")
    sol = solve_general(spec)
    if isinstance(sol, TwoSided):
        return "two", sol.x1s, sol.x2s
    if isinstance(sol, OneSidedLeft):
        return "left", sol.alpha, None
    if isinstance(sol, OneSidedRight):
        return "right", sol.beta, None
    raise _Exit(EXIT_NO_SOLUTION, "NoOptimum", "no optimal stopping time exists; nothing to verify")


def _rule_value(spec: ProblemSpec, kind: str, a: float, b):
    """The solver's payoff for the rule, as a function of the original x."""
    from .shooting import solve_shooting
    from .solver import payoff_two_sided, value_one_sided

    if spec.lam > 0:
        if kind != "two":
            raise PreconditionError("one-sided rules are only produced for lambda = 0")
        sol = solve_shooting(spec, validate=False)
        return sol.V
    H, natural, t = _h_of(spec)
    if kind == "two":
        P = payoff_two_sided(H, float(t.p(a)), float(t.p(b)))
    else:
        P = value_one_sided(H).V
    return lambda x: float(P(float(t.p(x))))


def _oracle_rows(spec: ProblemSpec, kind: str, a: float, b, V, n: int) -> list:
    from .oracle import green_value, green_value_one_sided
    from .scale import transform_problem

    if spec.lam != 0.0:
        raise PreconditionError("the Green oracle covers lambda = 0 problems only")
    natural, t = transform_problem(spec)
    rows = []
    if kind == "two":
        ya, yb = float(t.p(a)), float(t.p(b))
        for x in np.linspace(a, b, n):
            g = green_value(natural, ya, yb, float(t.p(x)))
            v = V(float(x))
            rows.append((float(x), v, g, abs(v - g)))
        return rows
    tpl = spec.template
    far = tpl.x2r if kind == "left" else tpl.x1l
    side = "left" if kind == "left" else "right"
    lo, hi = (a, far) if kind == "left" else (far, a)
    for x in np.linspace(lo, hi, n):
        g = green_value_one_sided(natural, side, float(t.p(a)), float(t.p(x)))
        v = V(float(x))
        rows.append((float(x), v, g, abs(v - g)))
    return rows


def _mc_rows(spec: ProblemSpec, kind: str, a: float, b, V, args) -> list:
    from .mcsim import HorizonCap, LeftExit, RightExit, TwoSidedExit, simulate_payoff, zscore

    if kind == "two":
        rule = TwoSidedExit(a, b)
    elif kind == "left":
        rule = HorizonCap(args.umax, LeftExit(a))
    else:
        rule = HorizonCap(args.umax, RightExit(a))
    xs = args.x if args.x is not None else [_center(spec)]
    rows = []
    for x in xs:
        est = simulate_payoff(spec, rule, x, n_paths=args.paths, step_u=args.step, seed=args.seed)
        ref = V(float(x))
        rows.append((rule.describe(), float(x), est.mean, est.stderr, zscore(est, ref),
                     est.truncated_fraction))
    return rows


ORACLE_COLUMNS = ["x", "solver", "oracle", "absdiff"]
MC_COLUMNS = ["rule", "x0", "mean", "stderr", "z", "truncated_fraction"]


def cmd_verify(spec: ProblemSpec, args, out) -> int:
    if not (args.oracle or args.mc):
        raise ConfigError("verify needs --oracle and/or --mc")
    kind, a, b = _solution_for_verify(spec, args)
    V = _rule_value(spec, kind, a, b)
    oracle = _oracle_rows(spec, kind, a, b, V, args.points) if args.oracle else None
    mc = _mc_rows(spec, kind, a, b, V, args) if args.mc else None
    if oracle is not None and mc is not None:
        _emit_json({"oracle": [dict(zip(ORACLE_COLUMNS, r)) for r in oracle],
                    "mc": [dict(zip(MC_COLUMNS, r)) for r in mc]}, out)
    elif oracle is not None:
        out.write(_csv_text(ORACLE_COLUMNS, oracle))
    else:
        out.write(_csv_text(MC_COLUMNS, mc))
    if oracle is not None:
        worst = max(r[3] for r in oracle)
        if worst > args.tol:
            raise _Exit(EXIT_VALIDATION, "OracleMismatch",
                        f"solver and oracle differ by {worst:.3e} > {args.tol:g}")
    if mc is not None:
        worst = max(abs(r[4]) for r in mc)
        if worst > args.zmax:
            raise _Exit(EXIT_VALIDATION, "MonteCarloMismatch",
                        f"Monte Carlo estimate is {worst:.2f} standard errors off (> {args.zmax:g})")
    return EXIT_OK


def cmd_curve(spec: ProblemSpec, args, out) -> int:
    from .pipeline import solve_general

    sol = solve_general(spec)
    if sol.V is None or (isinstance(sol, NoOptimum) and sol.infinite):
        raise _Exit(EXIT_NO_SOLUTION, "NoOptimum", "the value function is infinite")
    xg = _grid_points(spec, args.grid)
    out.write(_csv_text(["x", "V", "dV"],
                        ((x, sol.V(float(x)), sol.V.derivative(float(x))) for x in xg)))
    return EXIT_OK


COMMANDS = {"classify": cmd_classify, "solve": cmd_solve, "payoff": cmd_payoff,
            "shoot": cmd_shoot, "verify": cmd_verify, "curve": cmd_curve}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def _diagnostic(err, code: int, error: str, message: str):
    err.write(json.dumps({"error": error, "exit": code, "message": " ".join(message.split())}) + "\n")


def run(argv=None, out=None, err=None) -> int:
    """Run one command; returns the exit code instead of exiting."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        spec = load_problem(args.problem)
        spec.validate()
        return COMMANDS[args.command](spec, args, out)
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)
    except _Exit as exc:
        _diagnostic(err, exc.code, exc.error, str(exc))
        return exc.code
    except NoRoot as exc:
        _emit_json({"variant": "NoRoot", "message": str(exc), "report": exc.report}, out)
        _diagnostic(err, EXIT_NO_SOLUTION, "NoRoot", str(exc))
        return EXIT_NO_SOLUTION
    except (ConfigError, ProblemFileError, CoefficientError, ShapeError, DomainError,
            PreconditionError, OSError) as exc:
        _diagnostic(err, EXIT_CONFIG, type(exc).__name__, str(exc))
        return EXIT_CONFIG
    except ValidationError as exc:
        if exc.report is not None:
            _emit_json({"variant": "ValidationFailure", "message": str(exc),
                        "validation": exc.report}, out)
        _diagnostic(err, EXIT_VALIDATION, "ValidationError", str(exc))
        return EXIT_VALIDATION
    except OptStopError as exc:
        _diagnostic(err, EXIT_VALIDATION, type(exc).__name__, str(exc))
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - last line of defence, still one JSON line
        _diagnostic(err, EXIT_INTERNAL, type(exc).__name__, str(exc))
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
