"""Command-line frontend: evaluate, verify, solve, optimize, simulate, report.

Every run prints one JSON record to stdout with the fully resolved
configuration, the library version, and the results; bulk data (grids,
functions, trajectories, figures) goes to files named in the config.
Floats are printed with 17 significant digits so records round-trip
losslessly.  Exit codes: 0 = pass, 1 = an inequality violation was found
(which may be the expected outcome of a negative test), 2 = numerical or
usage failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import candidates as cand
from . import dyadic
from . import monge_ampere as ma
from . import optimizers as opt
from . import verifier
from .candidates import CandidateSurface
from .dyadic import DyadicFunction
from .errors import BellmanError

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_FAILURE = 2


# ---------------------------------------------------------------------------
# deterministic JSON with 17-significant-digit floats
# ---------------------------------------------------------------------------

def _json_scalar(v):
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return '"nan"'
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return f"{v:.17g}"
    if isinstance(v, str):
        out = v.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{out}"'
    raise TypeError(f"cannot render {type(v)!r}")


def render_json(obj) -> str:
    if isinstance(obj, dict):
        items = ",".join(f"{_json_scalar(str(k))}:{render_json(v)}"
                         for k, v in sorted(obj.items()))
        return "{" + items + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(render_json(v) for v in obj) + "]"
    return _json_scalar(obj)


def emit(record: dict, code: int) -> int:
    print(render_json(record))
    return code


def _record(command: str, config: dict, result=None, error=None) -> dict:
    rec = {"command": command, "config": config, "version": __version__,
           "timestamp": time.time()}
    if result is not None:
        rec["result"] = result
    if error is not None:
        rec["error"] = error
    return rec


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def parse_weight(spec: str, depth: int, left: float = 0.0,
                 right: float = 1.0) -> DyadicFunction:
    """Weight grammar: const:c | pow:a | log | file:path."""
    kind, _, arg = spec.partition(":")
    if kind == "const":
        return DyadicFunction.constant(float(arg), depth, left, right)
    if kind == "pow":
        return DyadicFunction.sample_power(float(arg), depth, left, right)
    if kind == "log":
        return DyadicFunction.sample_log(depth, left, right)
    if kind == "file":
        return DyadicFunction.from_csv(arg)
    raise ValueError(f"unknown weight spec {spec!r} "
                     "(expected const:c | pow:a | log | file:path)")


def _surface_from(args) -> CandidateSurface:
    p = args.problem
    if p == "buckley":
        return CandidateSurface.buckley(args.delta)
    if p in ("jn", "jn-upper"):
        return CandidateSurface.jn(args.eps, getattr(args, "delta", None) or args.eps,
                                   branch="upper")
    if p == "jn-lower":
        return CandidateSurface.jn(args.eps, getattr(args, "delta", None) or args.eps,
                                   branch="lower")
    if p == "two-weight":
        return CandidateSurface.two_weight(args.m, args.M)
    if p in ("maximal", "maximal-extended"):
        return CandidateSurface.maximal(args.L, extended=(p == "maximal-extended"))
    raise ValueError(f"unknown problem {p!r}")


def _config_of(args, drop=("func",)) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in drop and v is not None}
    cfg["threads"] = cfg.get("threads") or int(os.environ.get("BELLMAN_THREADS", "1"))
    return cfg


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    cfg = _config_of(args)
    try:
        surface = _surface_from(args)
        x1, x2 = args.x1, args.x2
        if surface.problem == "buckley":
            value = cand.buckley_value(x1, x2, args.delta)
        elif surface.problem == "two_weight":
            value = cand.two_weight_value(x1, x2, args.m, args.M)
        elif surface.problem == "jn":
            value = cand.jn_value(x1, x2, args.eps, surface.delta, surface.branch)
        elif args.problem == "maximal-extended":
            value = cand.maximal_value_extended(x1, x2, args.L)
        else:
            value = cand.maximal_value(x1, x2, args.L)
        g = cand.gradient(surface, x1, x2)
        h = cand.hessian(surface, x1, x2)
        det = float(h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0])
        result = {"problem": args.problem, "x": [x1, x2],
                  "params": surface.params(), "value": value,
                  "gradient": [float(g[0]), float(g[1])],
                  "hessian": [[float(h[0, 0]), float(h[0, 1])],
                              [float(h[1, 0]), float(h[1, 1])]],
                  "hessian_det": det}
        return emit(_record("eval", cfg, result=result), EXIT_PASS)
    except (BellmanError, ValueError) as exc:
        return emit(_record("eval", cfg,
                            error={"type": type(exc).__name__, "message": str(exc)}),
                    EXIT_FAILURE)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_main(args, cfg) -> int:
    surface = _surface_from(args)
    scan = verifier.main_inequality_scan(
        surface, count=args.samples, seed=args.seed, max_radius=args.max_radius)
    sound = scan.replay(surface, verifier.CostFunctional.for_surface(surface))
    result = {"suite": "main", "accepted_triples": scan.accepted,
              "violations": verifier.violations_to_json(scan.violations[:50]),
              "violation_count": len(scan.violations),
              "replay_sound": sound}
    code = EXIT_PASS if scan.passed else EXIT_VIOLATION
    return emit(_record("verify", cfg, result=result), code)


def _verify_induction(args, cfg) -> int:
    rng = np.random.default_rng(args.seed)
    depth = args.depth
    reports = []
    failures = 0
    for _ in range(args.count):
        if args.problem == "buckley":
            vals = np.exp(rng.normal(0.0, 0.5, 1 << depth))
            w = DyadicFunction(0.0, 1.0, vals)
            surface = CandidateSurface.buckley(w.ainf_ratio() * (1 + 1e-12))
            rep = verifier.bellman_induction(surface, None, w)
        elif args.problem == "jn":
            raw = DyadicFunction(0.0, 1.0, rng.normal(0.0, 1.0, 1 << depth))
            scale = args.eps * 0.99 / math.sqrt(max(raw.bmo_norm_sq(), 1e-300))
            f = DyadicFunction(0.0, 1.0, raw.values * scale)
            surface = CandidateSurface.jn(args.eps, 1.1 * args.eps)
            rep = verifier.bellman_induction(surface, None, f)
        elif args.problem == "maximal":
            vals = np.abs(rng.normal(1.0, 0.5, 1 << depth))
            w = DyadicFunction(0.0, 1.0, vals)
            L = float(np.mean(vals)) * (1.0 + rng.uniform(0.0, 1.0))
            rep = verifier.bellman_induction(CandidateSurface.maximal(L), None, w, L=L)
        elif args.problem == "two-weight":
            u = DyadicFunction(0.0, 1.0, np.exp(rng.normal(0.0, 0.3, 1 << depth)))
            v = DyadicFunction(0.0, 1.0, 1.0 / u.values)
            M = math.sqrt(max(float((u.level_means(l) * v.level_means(l)).max())
                              for l in range(depth + 1)))
            surface = CandidateSurface.two_weight(0.0, M * (1 + 1e-9))
            rep = verifier.bellman_induction(surface, None, (u, v))
        else:
            raise ValueError(args.problem)
        if not rep.passed:
            failures += 1
        reports.append({"monotone": rep.monotone, "margin": rep.margin,
                        "worst_increase": rep.worst_increase,
                        "root_value": rep.root_value, "objective": rep.objective})
    result = {"suite": "induction", "count": args.count, "failures": failures,
              "reports": reports[:20]}
    return emit(_record("verify", cfg, result=result),
                EXIT_PASS if failures == 0 else EXIT_VIOLATION)


def _verify_trajectory(args, cfg) -> int:
    rng = np.random.default_rng(args.seed)
    if args.problem == "jn":
        surface = CandidateSurface.jn(args.eps, args.delta or args.eps)
    elif args.problem == "maximal":
        surface = CandidateSurface.maximal(args.L)
    else:
        raise ValueError("trajectory suite covers 'jn' and 'maximal'")
    worst_drift = 0.0
    worst_straight = 0.0
    flagged = 0
    first = None
    for _ in range(args.points):
        if args.problem == "jn":
            x1 = rng.uniform(-0.6, 0.6)
            t = rng.uniform(0.1, 0.9) * args.eps ** 2
            x0 = (x1, x1 * x1 + t)
        else:
            x1 = rng.uniform(0.05, 0.95) * args.L
            x0 = (x1, x1 * x1 + rng.uniform(0.05, 1.5) * args.L ** 2)
        rep = ma.trace_trajectory(surface, x0)
        if first is None:
            first = rep
        worst_drift = max(worst_drift, float(np.max(rep.drift)))
        worst_straight = max(worst_straight, rep.straightness)
        if rep.both_endpoints_lower:
            flagged += 1
    if args.out and first is not None:
        first.to_csv(args.out)
    ok = worst_drift <= args.drift_tol and worst_straight <= args.straightness_tol
    result = {"suite": "trajectory", "points": args.points,
              "worst_drift": worst_drift, "worst_straightness": worst_straight,
              "drift_tol": args.drift_tol, "straightness_tol": args.straightness_tol,
              "both_lower_endpoints_flagged": flagged}
    return emit(_record("verify", cfg, result=result),
                EXIT_PASS if ok and flagged == 0 else EXIT_VIOLATION)


def _verify_cutoff(args, cfg) -> int:
    rng = np.random.default_rng(args.seed)
    worst_residual = 0.0
    norm_breaches = 0
    for _ in range(args.samples):
        depth = int(rng.integers(1, 7))
        f = DyadicFunction(0.0, 1.0, rng.normal(0.0, 2.0, 1 << depth))
        d = float(rng.normal(0.0, 1.5))
        worst_residual = max(worst_residual, abs(f.cutoff_identity_residual(d)))
        c = d - abs(rng.normal(0.0, 1.5)) - 1e-6
        cut = f.cutoff(c, d)
        if cut.bmo_norm_sq() > f.bmo_norm_sq() + 1e-12:
            norm_breaches += 1
    ok = worst_residual < args.tol and norm_breaches == 0
    result = {"suite": "cutoff", "samples": args.samples,
              "worst_residual": worst_residual, "tol": args.tol,
              "norm_monotonicity_breaches": norm_breaches}
    return emit(_record("verify", cfg, result=result),
                EXIT_PASS if ok else EXIT_VIOLATION)


def cmd_verify(args) -> int:
    cfg = _config_of(args)
    try:
        if args.suite == "main":
            return _verify_main(args, cfg)
        if args.suite == "induction":
            return _verify_induction(args, cfg)
        if args.suite == "trajectory":
            return _verify_trajectory(args, cfg)
        if args.suite == "cutoff":
            return _verify_cutoff(args, cfg)
        raise ValueError(f"unknown suite {args.suite!r}")
    except (BellmanError, ValueError) as exc:
        return emit(_record("verify", cfg,
                            error={"type": type(exc).__name__, "message": str(exc)}),
                    EXIT_FAILURE)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    cfg = _config_of(args)
    try:
        if args.problem == "maximal-lp":
            sol = verifier.dp_solve_lattice(
                "maximal-lp", {"L": args.L, "p": args.p}, h=args.h,
                splits=([] if args.splits == 0 else None),
                tol=args.tol, max_iter=args.max_iter)
            if args.out:
                sol.to_csv(args.out)
            in_vals = sol.values[sol.mask]
            result = {"iterations": sol.iterations,
                      "final_update": sol.final_update,
                      "converged": sol.converged,
                      "max_cell": float(np.max(in_vals)),
                      "boundary_value": float(args.L) ** args.p}
            if args.p == 2.0:
                ref = lambda a, b: cand.maximal_value_raw(a, b, args.L)
                result["max_gap_to_candidate"] = sol.max_gap_to(ref)
            return emit(_record("solve", cfg, result=result),
                        EXIT_PASS if sol.converged else EXIT_FAILURE)

        params = {"eps": args.eps} if args.problem == "jn" else {"delta": args.delta}
        max_span = 0 if args.splits == 0 else args.splits
        sol = verifier.dp_solve(args.problem, params, h=args.h, tol=args.tol,
                                max_iter=args.max_iter, max_span=max_span)
        if args.out:
            sol.to_csv(args.out)
        if args.problem == "jn":
            ref = lambda a, b: cand.jn_value_raw(a, b, args.eps, "upper")
            gap = sol.max_gap_to(ref)
            result = {"iterations": sol.iterations, "final_update": sol.final_update,
                      "converged": sol.converged, "max_gap_to_candidate": gap,
                      "value_at_top": float(sol.values[-1])}
        else:
            bound = 8.0 * math.log(args.delta)
            result = {"iterations": sol.iterations, "final_update": sol.final_update,
                      "converged": sol.converged,
                      "max_cell": float(np.max(sol.values)),
                      "upper_bound": bound,
                      "max_gap_to_candidate": sol.max_gap_to(
                          lambda s, _: 8.0 * np.log(s))}
        return emit(_record("solve", cfg, result=result),
                    EXIT_PASS if sol.converged else EXIT_FAILURE)
    except (BellmanError, ValueError) as exc:
        return emit(_record("solve", cfg,
                            error={"type": type(exc).__name__, "message": str(exc)}),
                    EXIT_FAILURE)


# ---------------------------------------------------------------------------
# optimize / simulate
# ---------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    cfg = _config_of(args)
    try:
        if args.problem in ("jn", "jn-lower"):
            build = opt.jn_optimizer if args.problem == "jn" else opt.jn_lower_optimizer
            f = build(args.x1, args.x2, args.eps, args.depth)
            if args.out:
                f.to_csv(args.out)
            st = f.averages()
            result = {"bellman_point": [st.mean, st.mean_sq],
                      "objective": st.mean_exp,
                      "bmo_norm_sq": f.bmo_norm_sq(),
                      "depth": args.depth}
            if args.problem == "jn":
                result["candidate_value"] = cand.jn_value(args.x1, args.x2, args.eps)
            else:
                result["candidate_value"] = cand.jn_value(args.x1, args.x2, args.eps,
                                                          branch="lower")
            return emit(_record("optimize", cfg, result=result), EXIT_PASS)
        if args.problem == "maximal":
            mo = opt.maximal_optimizer(args.L, args.v, args.n,
                                       fill_tol=args.fill_tol)
            if args.out:
                mo.w.to_csv(args.out)
            result = mo.to_json_dict()
            result["objective"] = mo.objective
            result["measured_maximal_mean_sq"] = mo.maximal_mean_sq()
            result["limit"] = (math.sqrt(args.v) + math.sqrt(args.v - args.L ** 2)) ** 2
            return emit(_record("optimize", cfg, result=result), EXIT_PASS)
        raise ValueError(f"unknown problem {args.problem!r}")
    except (BellmanError, ValueError) as exc:
        return emit(_record("optimize", cfg,
                            error={"type": type(exc).__name__, "message": str(exc)}),
                    EXIT_FAILURE)


def cmd_simulate(args) -> int:
    cfg = _config_of(args)
    try:
        violations = []
        if args.problem == "buckley":
            w = parse_weight(args.weight, args.depth)
            ratio = w.ainf_ratio()
            bs = w.buckley_sum()
            bound = 8.0 * math.log(ratio) if math.isfinite(ratio) else math.inf
            if bs > bound + 1e-9:
                violations.append({"check": "buckley_sum <= 8 log ainf_ratio",
                                   "lhs": bs, "rhs": bound})
            st = w.averages()
            result = {"bellman_point": [st.mean, st.mean_log],
                      "ainf_ratio": ratio, "buckley_sum": bs,
                      "bound_8_log_ratio": bound,
                      "haar_form_sum": w.haar_form_buckley_sum()}
        elif args.problem == "jn":
            f = parse_weight(args.weight, args.depth)
            st = f.averages()
            norm_sq = f.bmo_norm_sq()
            eps = math.sqrt(norm_sq)
            result = {"bellman_point": [st.mean, st.mean_sq],
                      "bmo_norm_sq": norm_sq, "mean_exp": st.mean_exp}
            if eps < 1.0 and norm_sq > 0:
                bound = cand.jn_value_raw(st.mean, st.mean_sq, eps)
                result["bound_at_own_eps"] = float(bound)
                if st.mean_exp > float(bound) + 1e-9:
                    violations.append({"check": "mean_exp <= candidate at own eps",
                                       "lhs": st.mean_exp, "rhs": float(bound)})
        elif args.problem == "maximal":
            w = parse_weight(args.weight, args.depth)
            st = w.averages()
            L = args.L if args.L is not None else st.mean
            Mw = w.dyadic_maximal(L)
            msq = float(np.mean(Mw.values ** 2))
            bound = 4.0 * st.mean_sq
            if L <= st.mean * (1 + 1e-12) and msq > bound + 1e-9:
                violations.append({"check": "<(Mw)^2> <= 4 <w^2> at L = <w>",
                                   "lhs": msq, "rhs": bound})
            result = {"bellman_point": [st.mean, st.mean_sq], "L": L,
                      "maximal_mean_sq": msq, "bound_4_mean_sq": bound,
                      "candidate_value": cand.maximal_value(st.mean, st.mean_sq, L)}
        elif args.problem == "two-weight":
            u = parse_weight(args.weight, args.depth)
            v = parse_weight(args.weight2, args.depth)
            sup_prod = max(float((u.level_means(l) * v.level_means(l)).max())
                           for l in range(args.depth + 1))
            M = math.sqrt(sup_prod)
            tws = dyadic.two_weight_sum(u, v)
            u0 = float(u.level_means(0)[0])
            v0 = float(v.level_means(0)[0])
            bound = 16.0 * M * math.sqrt(u0 * v0)
            if tws > bound + 1e-9:
                violations.append({"check": "sum <= 16 M sqrt(<u><v>)",
                                   "lhs": tws, "rhs": bound})
            result = {"bellman_point": [u0, v0], "M": M,
                      "two_weight_sum": tws, "bound_16M": bound}
        else:
            raise ValueError(f"unknown problem {args.problem!r}")
        if args.out:
            (w if args.problem != "two-weight" else u).to_csv(args.out)
        result["violations"] = violations
        return emit(_record("simulate", cfg, result=result),
                    EXIT_PASS if not violations else EXIT_VIOLATION)
    except (BellmanError, ValueError) as exc:
        return emit(_record("simulate", cfg,
                            error={"type": type(exc).__name__, "message": str(exc)}),
                    EXIT_FAILURE)


def cmd_report(args) -> int:
    cfg = _config_of(args)
    try:
        from . import report
        files = report.render(args.problem, args.out_dir, eps=args.eps,
                              delta=args.delta, L=args.L, m=args.m, M=args.M,
                              depth=args.depth)
        return emit(_record("report", cfg, result={"files": files}), EXIT_PASS)
    except (BellmanError, ValueError) as exc:
        return emit(_record("report", cfg,
                            error={"type": type(exc).__name__, "message": str(exc)}),
                    EXIT_FAILURE)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellman",
        description="Sharp Bellman functions: evaluate, verify, solve, optimize.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (results are deterministic regardless; "
                             "default from BELLMAN_THREADS)")
    sub = parser.add_subparsers(dest="cmd", required=True)

    pe = sub.add_parser("eval", help="evaluate a candidate surface at a point")
    pe.add_argument("--problem", required=True,
                    choices=["buckley", "jn-upper", "jn-lower", "two-weight",
                             "maximal", "maximal-extended"])
    pe.add_argument("--x1", type=float, required=True)
    pe.add_argument("--x2", type=float, required=True)
    pe.add_argument("--eps", type=float)
    pe.add_argument("--delta", type=float)
    pe.add_argument("--m", type=float)
    pe.add_argument("--M", type=float)
    pe.add_argument("--L", type=float)
    pe.set_defaults(func=cmd_eval)

    pv = sub.add_parser("verify", help="run a verification suite")
    pv.add_argument("suite", choices=["main", "induction", "trajectory", "cutoff"])
    pv.add_argument("--problem",
                    choices=["buckley", "jn", "two-weight", "maximal"])
    pv.add_argument("--eps", type=float)
    pv.add_argument("--delta", type=float)
    pv.add_argument("--m", type=float, default=0.0)
    pv.add_argument("--M", type=float)
    pv.add_argument("--L", type=float)
    pv.add_argument("--samples", type=int, default=100000)
    pv.add_argument("--count", type=int, default=20)
    pv.add_argument("--depth", type=int, default=10)
    pv.add_argument("--points", type=int, default=10)
    pv.add_argument("--seed", type=int, required=True)
    pv.add_argument("--max-radius", dest="max_radius", type=float)
    pv.add_argument("--drift-tol", dest="drift_tol", type=float, default=1e-5)
    pv.add_argument("--straightness-tol", dest="straightness_tol", type=float,
                    default=1e-6)
    pv.add_argument("--tol", type=float, default=1e-10)
    pv.add_argument("--out")
    pv.set_defaults(func=cmd_verify)

    ps = sub.add_parser("solve", help="value-iteration oracle")
    ps.add_argument("--problem", required=True,
                    choices=["jn", "buckley", "maximal-lp"])
    ps.add_argument("--eps", type=float)
    ps.add_argument("--delta", type=float)
    ps.add_argument("--L", type=float, default=1.0)
    ps.add_argument("--p", type=float, default=2.0)
    ps.add_argument("--h", type=float, required=True)
    ps.add_argument("--tol", type=float, default=1e-6)
    ps.add_argument("--max-iter", dest="max_iter", type=int, default=2000)
    ps.add_argument("--splits", type=int, default=None,
                    help="split-set span; 0 degenerates to boundary data")
    ps.add_argument("--out")
    ps.set_defaults(func=cmd_solve)

    po = sub.add_parser("optimize", help="construct an extremal test function")
    po.add_argument("--problem", required=True,
                    choices=["jn", "jn-lower", "maximal"])
    po.add_argument("--eps", type=float)
    po.add_argument("--x1", type=float)
    po.add_argument("--x2", type=float)
    po.add_argument("--depth", type=int, default=20)
    po.add_argument("--L", type=float)
    po.add_argument("--v", type=float)
    po.add_argument("--n", type=int)
    po.add_argument("--fill-tol", dest="fill_tol", type=float, default=1e-3)
    po.add_argument("--out")
    po.set_defaults(func=cmd_optimize)

    pm = sub.add_parser("simulate", help="measure the statistics of a test function")
    pm.add_argument("problem", choices=["buckley", "jn", "two-weight", "maximal"])
    pm.add_argument("--weight", required=True,
                    help="const:c | pow:a | log | file:path")
    pm.add_argument("--weight2", help="second weight for two-weight")
    pm.add_argument("--depth", type=int, default=16)
    pm.add_argument("--L", type=float)
    pm.add_argument("--out")
    pm.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("report", help="render figures and CSVs for a problem")
    pr.add_argument("--problem", required=True,
                    choices=["jn", "buckley", "maximal", "two-weight"])
    pr.add_argument("--eps", type=float, default=0.5)
    pr.add_argument("--delta", type=float)
    pr.add_argument("--L", type=float, default=1.0)
    pr.add_argument("--m", type=float, default=0.0)
    pr.add_argument("--M", type=float, default=2.0)
    pr.add_argument("--depth", type=int, default=16)
    pr.add_argument("--out-dir", dest="out_dir", default="reports")
    pr.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
