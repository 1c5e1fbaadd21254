"""Command-line front end.

Exit status is 0 on success, 1 when a solve does not reach its gap
tolerance (or a self-test criterion fails) and 2 on input errors, including
infeasible problems.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from . import io as hio
from .entropies import DomainError, EntropyFunction
from .geometry import GroundSpace, UnsupportedGeometryError
from .hk import (NonOptimalPlanError, bl_distance, geodesic_interp, ghk_distance,
                 hellinger, hk_distance, lift_plan, scaling_limits, wasserstein)
from .hopflax import hj_residual, hopflax_field
from .perspective import perspective
from .solver import ETOptions, InfeasibleProblemError, solve_et

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

METRICS = ("hk", "ghk", "hell", "w2", "bl")
GEODESIC_DIGITS = 12


class _Failure(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _threads() -> int:
    raw = os.environ.get("HELLKAN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise _Failure(EXIT_INPUT, f"HELLKAN_THREADS must be an integer, got {raw!r}") from None


def _floats_arg(text: str, what: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise _Failure(EXIT_INPUT, f"{what}: expected comma separated numbers, got {text!r}") from None
    if not vals:
        raise _Failure(EXIT_INPUT, f"{what}: empty list")
    return vals


def _options(args, base: Optional[ETOptions] = None) -> ETOptions:
    fields = dict((base or ETOptions()).__dict__)
    if getattr(args, "tol", None) is not None:
        fields["gap_tol"] = args.tol
    if getattr(args, "eps_schedule", None):
        sched = _floats_arg(args.eps_schedule, "--eps-schedule")
        if any(e <= 0 for e in sched):
            raise _Failure(EXIT_INPUT, "--eps-schedule entries must be positive")
        fields["epsilon_schedule"] = tuple(sched)
        fields["final_epsilon"] = min(fields["final_epsilon"], min(sched))
    if getattr(args, "seed", None) is not None:
        fields["seed"] = args.seed
    return ETOptions(**fields)


def _emit(args, text: str) -> None:
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise _Failure(EXIT_INPUT, f"{args.out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _map(fn: Callable, items: Sequence) -> list:
    n = min(_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------------
# commands


def _distance_one(metric: str, path: str, args) -> dict:
    spec = hio.problem_from_dict(hio.load_json(path))
    opts = _options(args, spec.opts)
    mu1, mu2, space = spec.mu1, spec.mu2, spec.space
    if metric == "hk":
        r = hk_distance(mu1, mu2, space, opts)
    elif metric == "ghk":
        r = ghk_distance(mu1, mu2, space, opts)
    elif metric == "w2":
        r = wasserstein(mu1, mu2, space, 2.0, opts=opts)
    elif metric == "hell":
        return {"file": path, "metric": metric, "value": hellinger(mu1, mu2), "gap": 0.0,
                "status": "exact"}
    else:
        return {"file": path, "metric": metric, "value": bl_distance(mu1, mu2, space), "gap": 0.0,
                "status": "exact"}
    status = "converged" if r.converged else "max_iters"
    return {"file": path, "metric": metric, "value": r.value, "gap": r.gap, "status": status}


def cmd_distance(args) -> int:
    rows = _map(lambda p: _distance_one(args.metric, p, args), args.inputs)
    if args.format == "json":
        body = rows[0] if len(rows) == 1 else rows
        _emit(args, hio.dumps(body))
    elif args.format == "csv":
        _emit(args, hio.write_csv(["file", "metric", "value", "gap", "status"],
                                  [[r["file"], r["metric"], r["value"], r["gap"], r["status"]]
                                   for r in rows]))
    else:
        lines = []
        for r in rows:
            prefix = f"{r['file']}: " if len(rows) > 1 else ""
            lines.append(f"{prefix}{r['value']:.6f} ± {r['gap']:.1e}")
        _emit(args, "\n".join(lines) + "\n")
    return EXIT_NUMERIC if any(r["status"] == "max_iters" for r in rows) else EXIT_OK


def cmd_plan(args) -> int:
    spec = hio.problem_from_dict(hio.load_json(args.input))
    opts = _options(args, spec.opts)
    problem = spec.problem
    sol = solve_et(problem, opts)
    if args.format == "csv":
        s1, s2 = problem.mu1.support, problem.mu2.support
        rows = [[int(s1[i]), int(s2[j]), float(w)] for i, j, w in sol.triplets(args.threshold)]
        _emit(args, hio.write_csv(["i", "j", "mass"], rows))
    else:
        _emit(args, hio.dumps(hio.solution_to_dict(sol, problem, args.threshold)))
    return EXIT_OK if sol.converged else EXIT_NUMERIC


def _canonical_frame(space: GroundSpace, mu) -> list[tuple]:
    rows = []
    for idx, w in zip(mu.support, mu.weights):
        if w > 0:
            rows.append(tuple(float(v) for v in space.points[idx]) + (float(w),))
    return sorted(rows)


def cmd_geodesic(args) -> int:
    spec = hio.problem_from_dict(hio.load_json(args.input))
    if spec.space.points is None:
        raise _Failure(EXIT_INPUT, "geodesic needs a space given by point coordinates")
    times = _floats_arg(args.t, "--t") if args.t else [0.0, 0.25, 0.5, 0.75, 1.0]
    if any(not 0.0 <= t <= 1.0 for t in times):
        raise _Failure(EXIT_INPUT, "--t values must lie in [0, 1]")
    res = hk_distance(spec.mu1, spec.mu2, spec.space, _options(args, spec.opts))
    lifted = lift_plan(res.solution, res.problem)
    k = spec.space.points.shape[1]
    frames = []
    for t in times:
        sp, mu = geodesic_interp(lifted, t, spec.space)
        frames.append((t, _canonical_frame(sp, mu)))
    if args.format == "json":
        body = {"hk": res.value, "gap": res.gap, "frames": [
            {"t": t, "points": [list(r[:k]) for r in rows],
             "masses": [float(hio.fmt(r[k], GEODESIC_DIGITS)) for r in rows]}
            for t, rows in frames]}
        _emit(args, hio.dumps(body))
    else:
        header = ["t"] + [f"x{c}" for c in range(k)] + ["mass"]
        out = [[t, *r] for t, rows in frames for r in rows]
        _emit(args, hio.write_csv(header, out, GEODESIC_DIGITS))
    return EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_limits(args) -> int:
    spec = hio.problem_from_dict(hio.load_json(args.input))
    factors = _floats_arg(args.factors, "--factors")
    if any(f <= 0 for f in factors):
        raise _Failure(EXIT_INPUT, "--factors must be positive")
    tab = scaling_limits(spec.mu1, spec.mu2, spec.space, factors, _options(args, spec.opts))
    if args.format == "json":
        _emit(args, hio.dumps({
            "rows": [list(r) for r in tab.rows()], "hellinger": tab.hellinger,
            "wasserstein": tab.wasserstein, "hellinger_monotone": tab.hellinger_monotone,
            "wasserstein_monotone": tab.wasserstein_monotone}))
    else:
        _emit(args, hio.write_csv(["lambda", "hk_lambda_d", "lambda_hk_d_over_lambda"],
                                  tab.rows()))
    ok = tab.hellinger_monotone and (tab.wasserstein_monotone or math.isinf(tab.wasserstein))
    return EXIT_OK if ok else EXIT_NUMERIC


def _entropy_arg(text: str) -> EntropyFunction:
    shortcuts = {"log": {"family": "power", "p": 1.0}, "tv": {"family": "tv"},
                 "indicator": {"family": "indicator"}}
    d = shortcuts.get(text)
    if d is None:
        d = hio.loads(text, "entropy")
    try:
        return EntropyFunction.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise _Failure(EXIT_INPUT, f"entropy: {exc}") from None


def cmd_perspective(args) -> int:
    e1, e2 = _entropy_arg(args.entropy1), _entropy_arg(args.entropy2)
    try:
        c = float(args.c)
    except ValueError:
        raise _Failure(EXIT_INPUT, f"--c: cannot read {args.c!r} as a number") from None
    if math.isnan(c):
        raise _Failure(EXIT_INPUT, "--c must not be nan")
    if min(args.r1, args.r2, c) < 0:
        raise _Failure(EXIT_INPUT, "r1, r2 and c must be nonnegative")
    ev = perspective(e1, e2, args.r1, args.r2, c, method=args.method)
    theta = ev.argmin_theta
    if args.format == "json":
        _emit(args, hio.dumps({"value": ev.value, "theta": theta, "method": ev.method}))
    elif args.format == "csv":
        _emit(args, hio.write_csv(["value", "theta", "method"],
                                  [[ev.value, "" if theta is None else float(theta), ev.method]]))
    else:
        th = "n/a" if theta is None else hio.fmt(theta)
        _emit(args, f"value {hio.fmt(ev.value)}\ntheta {th}\n")
    return EXIT_OK


def cmd_hopflax(args) -> int:
    header, body = hio.read_csv_table(args.input)
    if "xi" not in header:
        raise _Failure(EXIT_INPUT, f"{args.input}: needs a column named 'xi'")
    col = header.index("xi")
    coords = np.delete(body, col, axis=1)
    if coords.shape[1] == 0:
        raise _Failure(EXIT_INPUT, f"{args.input}: needs coordinate columns besides 'xi'")
    space = GroundSpace.from_points(coords)
    times = _floats_arg(args.times, "--times")
    if any(not 0.0 <= t <= 1.0 for t in times):
        raise _Failure(EXIT_INPUT, "--times must lie in [0, 1]")
    field = hopflax_field(body[:, col], times, space)
    names = [h for h in header if h != "xi"]
    rows = [[t, *coords[i].tolist(), field.values[k, i]]
            for k, t in enumerate(times) for i in range(len(coords))]
    text = hio.write_csv(["t", *names, "value"], rows)
    if args.residual:
        res = hj_residual(field, space)
        text += f"# max residual {hio.fmt(float(np.max(res)), 6)}\n"
    _emit(args, text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import format_table, run_all
    only = [int(x) for x in _floats_arg(args.only, "--only")] if args.only else None
    seed = 0 if args.seed is None else args.seed
    results = run_all(seed, only, echo=lambda line: print(line, flush=True))
    passed = sum(r.passed for r in results)
    summary = f"{passed}/{len(results)} criteria passed\n"
    print(summary, end="")
    if args.out:
        _emit(args, format_table(results) + "\n")
    return EXIT_OK if passed == len(results) else EXIT_NUMERIC


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="duality gap tolerance (relative to 1+m1+m2)")
    common.add_argument("--eps-schedule", help="comma separated regularization levels")
    common.add_argument("--seed", type=int, help="seed for randomized steps")
    common.add_argument("--out", help="write the result to this file instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), help="machine readable output")

    p = argparse.ArgumentParser(prog="hellkan",
                                description="Entropy-Transport and Hellinger-Kantorovich tools")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("distance", parents=[common], help="distance between mu1 and mu2")
    d.add_argument("inputs", nargs="+", help="problem JSON files")
    d.add_argument("--metric", choices=METRICS, default="hk")
    d.set_defaults(func=cmd_distance)

    pl = sub.add_parser("plan", parents=[common], help="solve a general problem file")
    pl.add_argument("input")
    pl.add_argument("--threshold", type=float, default=0.0, help="drop plan entries below this")
    pl.set_defaults(func=cmd_plan)

    g = sub.add_parser("geodesic", parents=[common], help="frames of the HK geodesic")
    g.add_argument("input")
    g.add_argument("--t", help="comma separated times in [0, 1]")
    g.set_defaults(func=cmd_geodesic)

    li = sub.add_parser("limits", parents=[common], help="Hellinger and Wasserstein scaling table")
    li.add_argument("input")
    li.add_argument("--factors", default="1,2,4,8,16,32,64")
    li.set_defaults(func=cmd_limits)

    pe = sub.add_parser("perspective", parents=[common], help="marginal perspective H_c(r1, r2)")
    pe.add_argument("--entropy1", default="log", help="'log', 'tv', 'indicator' or a JSON record")
    pe.add_argument("--entropy2", default="log")
    pe.add_argument("--r1", type=float, required=True)
    pe.add_argument("--r2", type=float, required=True)
    pe.add_argument("--c", default="0", help="cost value, 'inf' allowed")
    pe.add_argument("--method", choices=("auto", "closed", "numeric"), default="auto")
    pe.set_defaults(func=cmd_perspective)

    h = sub.add_parser("hopflax", parents=[common], help="Hopf-Lax semigroup of a datum")
    h.add_argument("input", help="CSV with coordinate columns and a column 'xi'")
    h.add_argument("--times", default="0,0.25,0.5,0.75,1")
    h.add_argument("--residual", action="store_true",
                   help="append the Hamilton-Jacobi residual (uniform 1-D grids)")
    h.set_defaults(func=cmd_hopflax)

    s = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", help="comma separated criterion numbers")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"hellkan: {exc}", file=sys.stderr)
        return exc.code
    except InfeasibleProblemError as exc:
        print(f"hellkan: infeasible problem: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonOptimalPlanError as exc:
        print(f"hellkan: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (hio.InputError, DomainError, UnsupportedGeometryError, ValueError) as exc:
        print(f"hellkan: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
