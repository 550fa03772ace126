"""Command-line driver: read or generate a problem, run the solver, and
emit machine-readable results.

Exit codes: 0 optimal, 2 primal infeasible, 3 dual infeasible, 4 iteration
or time limit, 1 anything that went wrong.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .core import Status
from .problems import (gen_lasso_socp, gen_random_lp, gen_staircase_pagerank,
                       gen_svm_instance, gen_svm_socp, problem_to_json,
                       read_problem_file, write_mps)
from .solver import SolverConfig, solve

EXIT_CODE = {
    Status.OPTIMAL: 0,
    Status.PRIMAL_INFEASIBLE: 2,
    Status.DUAL_INFEASIBLE: 3,
    Status.ITERATION_LIMIT: 4,
    Status.TIME_LIMIT: 4,
    Status.NUMERICAL_FAILURE: 1,
}

TRACE_FIELDS = ("k", "mu", "inner_iters", "pres", "dres", "dgap", "restarts")


def _none_if_nan(x):
    x = float(x)
    return None if math.isnan(x) else x


def result_record(result) -> dict:
    """JSON-safe summary of a SolveResult (NaN mapped to null)."""
    res = result.residuals
    return {
        "status": result.status.value,
        "objective_primal": _none_if_nan(result.objective_primal),
        "objective_dual": _none_if_nan(result.objective_dual),
        "residuals": {
            "pres": _none_if_nan(res.pres),
            "dres": _none_if_nan(res.dres),
            "dgap": _none_if_nan(res.dgap),
            "norm": res.norm_mode,
        },
        "outer_iters": int(result.outer_iters),
        "admm_iters": int(result.admm_iters),
        "wall_time": float(result.wall_time),
    }


def emit_result(record: dict) -> str:
    return json.dumps(record, indent=2, allow_nan=False)


def parse_result(text: str) -> dict:
    return json.loads(text)


def shifted_geometric_mean(times, shift: float = 10.0) -> float:
    """exp(mean(log(t + shift))) - shift over the given runtimes."""
    t = np.asarray(list(times), dtype=float)
    if t.size == 0:
        raise ValueError("no runtimes")
    if np.any(t + shift <= 0):
        raise ValueError("runtimes must exceed -shift")
    return float(np.exp(np.mean(np.log(t + shift))) - shift)


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=1_000_000)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--linsys", choices=("direct", "indirect"),
                   default="direct")
    p.add_argument("--mu", choices=("aggressive", "loqo", "hybrid"),
                   default="hybrid", help="barrier-weight schedule")
    p.add_argument("--restart", dest="restart", action="store_true",
                   default=True)
    p.add_argument("--no-restart", dest="restart", action="store_false")
    p.add_argument("--restart-threshold", type=float, default=1e5)
    p.add_argument("--restart-period", type=int, default=1000)
    p.add_argument("--half-update", action="store_true")
    p.add_argument("--alpha1", type=float,
                   default=SolverConfig.alpha1)
    p.add_argument("--alpha2", type=float,
                   default=SolverConfig.alpha2)
    p.add_argument("--scaling", choices=("none", "ruiz", "pc", "both"),
                   default="both")
    p.add_argument("--null-objective", action="store_true",
                   help="certify feasibility only (requires c = 0)")


def _add_generator_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--density", type=float, default=0.2)
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--damping", type=float, default=0.99)
    p.add_argument("--lam", type=float, default=None,
                   help="regularization weight (lasso/svm)")
    p.add_argument("--svm-c", type=float, default=1.0,
                   help="hinge-loss weight for svm instances")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="coneip",
        description="First-order conic optimizer (LP/SOC/RSOC/PSD).")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one instance")
    src = ps.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="problem file (.mps or .json)")
    src.add_argument("--generate",
                     choices=("random-lp", "staircase-pagerank", "lasso",
                              "svm"))
    ps.add_argument("--format", choices=("mps", "json"), default=None,
                    help="input format (default: by file suffix)")
    _add_solver_flags(ps)
    _add_generator_flags(ps)
    ps.add_argument("--trace", help="write per-outer-iteration CSV here")
    ps.add_argument("--output", help="write the JSON result record here")
    ps.add_argument("--quiet", action="store_true")

    pg = sub.add_parser("generate", help="generate an instance file")
    pg.add_argument("family",
                    choices=("random-lp", "staircase-pagerank", "lasso",
                             "svm"))
    _add_generator_flags(pg)
    pg.add_argument("--format", choices=("mps", "json"), default=None)
    pg.add_argument("--output", required=True)

    pb = sub.add_parser("bench", help="run a manifest of instances")
    pb.add_argument("manifest", help="JSON manifest of instances/configs")
    pb.add_argument("--time-limit", type=float, default=None,
                    help="override the manifest's per-instance limit")
    pb.add_argument("--output", help="write the result table as JSON here")
    return ap


def _make_problem(family: str, args) -> "ConicProblem":
    if family == "random-lp":
        return gen_random_lp(args.m, args.n, density=args.density,
                             seed=args.seed)
    if family == "staircase-pagerank":
        return gen_staircase_pagerank(args.nodes, damping=args.damping,
                                      seed=args.seed)
    if family == "lasso":
        return gen_lasso_socp(args.m, args.n, lambda_rule=args.lam,
                              seed=args.seed)[0]
    if family == "svm":
        X, y = gen_svm_instance(args.m, args.n, seed=args.seed)
        lam = 1e-2 if args.lam is None else args.lam
        return gen_svm_socp(X, y, C=args.svm_c, lam=lam)
    raise ValueError(f"unknown family {family!r}")


def _config_from_args(args) -> SolverConfig:
    return SolverConfig(
        tol=args.tol,
        mu_strategy=args.mu,
        restart_enabled=args.restart,
        restart_threshold=args.restart_threshold,
        restart_period=args.restart_period,
        half_update=args.half_update,
        alpha1=args.alpha1,
        alpha2=args.alpha2,
        max_admm_iters=args.max_iters,
        time_limit=args.time_limit,
        skip_dual_check=args.null_objective,
        linsys_mode=args.linsys,
        scaling=args.scaling,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_solve(args) -> int:
    if args.input is not None:
        problem = read_problem_file(args.input, fmt=args.format)
    else:
        problem = _make_problem(args.generate, args)

    records = []
    result, trace = solve(problem, _config_from_args(args),
                          trace_sink=records.append)

    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(",".join(TRACE_FIELDS) + "\n")
            for r in records:
                fh.write(",".join(
                    repr(getattr(r, f)) if isinstance(getattr(r, f), float)
                    else str(getattr(r, f)) for f in TRACE_FIELDS) + "\n")

    record = result_record(result)
    text = emit_result(record)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    if not args.quiet:
        print(text)
        print(f"# {problem.name}: {record['status']} in "
              f"{record['admm_iters']} ADMM iterations, "
              f"{record['wall_time']:.3f}s", file=sys.stderr)
    return EXIT_CODE[result.status]


def run_generate(args) -> int:
    problem = _make_problem(args.family, args)
    fmt = args.format
    if fmt is None:
        fmt = "mps" if args.output.lower().endswith(".mps") else "json"
    if fmt == "mps":
        text = write_mps(problem)
    else:
        text = problem_to_json(problem)
    with open(args.output, "w") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")
    print(f"wrote {problem.name} ({problem.m} rows, {problem.n} cols) "
          f"to {args.output}")
    return 0


_BENCH_FAILURE_TIME = 15000.0


def run_bench(args) -> int:
    """Run every manifest instance under each config; report shifted
    geometric means (shift 10, failures at 15000 s) normalized so the best
    config scores 1."""
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    instances = manifest["instances"]
    configs = manifest.get("configs") or [{"name": "default"}]
    time_limit = args.time_limit
    if time_limit is None:
        time_limit = manifest.get("time_limit")

    table = {}
    for conf in configs:
        conf = dict(conf)
        name = conf.pop("name", f"config{len(table)}")
        times = []
        solved = 0
        per_instance = {}
        for inst in instances:
            iname = inst.get("name", inst.get("path", "?"))
            try:
                if "path" in inst:
                    problem = read_problem_file(inst["path"],
                                                fmt=inst.get("format"))
                else:
                    ns = argparse.Namespace(
                        seed=inst.get("seed", 0), m=inst.get("m", 20),
                        n=inst.get("n", 40),
                        density=inst.get("density", 0.2),
                        nodes=inst.get("nodes", 100),
                        damping=inst.get("damping", 0.99),
                        lam=inst.get("lam"), svm_c=inst.get("svm_c", 1.0))
                    problem = _make_problem(inst["generate"], ns)
                cfg = SolverConfig(time_limit=time_limit, **conf)
                result, _ = solve(problem, cfg)
                ok = result.status is Status.OPTIMAL
                t = result.wall_time if ok else _BENCH_FAILURE_TIME
                solved += ok
            except Exception as exc:  # missing file, bad data: a failure
                print(f"bench: {iname} under {name}: {exc}",
                      file=sys.stderr)
                t, ok = _BENCH_FAILURE_TIME, False
            times.append(t)
            per_instance[iname] = {"time": t, "solved": bool(ok)}
        table[name] = {
            "sgm": shifted_geometric_mean(times),
            "solved": solved,
            "total": len(instances),
            "per_instance": per_instance,
        }

    best = min(entry["sgm"] for entry in table.values())
    scale = best if best > 0 else 1.0
    for entry in table.values():
        entry["sgm_normalized"] = (1.0 if entry["sgm"] == best
                                   else entry["sgm"] / scale)

    width = max(len(k) for k in table)
    print(f"{'config'.ljust(width)}  solved  SGM        normalized")
    for name, entry in table.items():
        print(f"{name.ljust(width)}  {entry['solved']:3d}/{entry['total']:<3d}"
              f" {entry['sgm']:10.4f} {entry['sgm_normalized']:10.4f}")
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(table, fh, indent=2)
            fh.write("\n")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return run_solve(args)
        if args.command == "generate":
            return run_generate(args)
        return run_bench(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"coneip: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
