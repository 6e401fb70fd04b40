"""Experiment command line: run, compare, convergence.

Exit codes: 0 when the experiment ran (failing to stabilize is a recorded
result, not a process error), 2 for usage errors, 3 for an internal
numerical abort.  ``STABKIT_OUT`` overrides ``--out``.

File layout:
    <out>/<model>/<method>/seed<N>/record.json, trace.csv, trajectory.csv
    <out>/<model>/compare/compare.json, compare.csv
    <out>/<model>/convergence/seed<N>/trace_small.csv, trace_large.csv,
        convergence.json
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time

from . import __version__
from .adaptive import IciConfig, run_baseline, run_ici
from .errors import StabkitError
from .models import MODEL_NAMES, get_model
from .records import (
    build_record,
    decide_outcome,
    verify_controller,
    write_record_json,
    write_trajectory_csv,
    _atomic_write,
)

METHODS = ("ici", "baseline-single", "baseline-multi")


def _add_common(parser):
    parser.add_argument("--model", required=True, choices=MODEL_NAMES)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="stabkit_results")
    parser.add_argument("--domain", choices=("dt", "ct"), default="dt")
    parser.add_argument("--max-iters", type=int, default=60)
    parser.add_argument("--ortho-tol", type=float, default=1e-8)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--stop-tol", type=float, default=None)
    # model parameters
    parser.add_argument("--n", type=int, default=6, help="linsynth state dimension")
    parser.add_argument("--p", type=int, default=2, help="linsynth input dimension")
    parser.add_argument("--n-unstable", type=int, default=None)
    parser.add_argument("--n-side", type=int, default=20, help="heat2d grid side")
    parser.add_argument("--shift-c", type=float, default=None, help="heat2d shift")
    parser.add_argument("--cells", type=int, default=100, help="reactor1d cells")
    parser.add_argument("--particles", type=int, default=100, help="toda particles")


def _model_params(args):
    if args.model == "linsynth":
        params = {"n": args.n, "p": args.p}
        if args.n_unstable is not None:
            params["n_unstable"] = args.n_unstable
        return params
    if args.model == "heat2d":
        params = {"n_side": args.n_side}
        if args.shift_c is not None:
            params["c"] = args.shift_c
        return params
    if args.model == "reactor1d":
        return {"cells": args.cells}
    return {"particles": args.particles}


def _build_model(args, seed):
    return get_model(args.model, seed=seed, domain=args.domain, **_model_params(args))


def _config(args, seed, extra=None):
    cfg = IciConfig(
        max_iters=args.max_iters,
        stop_tol=args.stop_tol,
        ortho_tol=args.ortho_tol,
        alpha=args.alpha,
        rng_seed=seed,
    )
    echo = {
        "version": __version__,
        "model": args.model,
        "model_params": _model_params(args),
        "domain": args.domain,
        "seed": seed,
        "max_iters": cfg.max_iters,
        "ortho_tol": cfg.ortho_tol,
        "alpha": cfg.alpha,
        "stop_tol": cfg.stop_tol,
    }
    if extra:
        echo.update(extra)
    return cfg, echo


def _out_root(args):
    return os.environ.get("STABKIT_OUT", args.out)


def _execute_method(model, method, cfg, args):
    if method == "ici":
        return run_ici(model, cfg=cfg)
    n_traj = 1 if method == "baseline-single" else args.n_trajectories
    budget = args.budget
    if budget is None:
        raise StabkitError("baselines require --budget")
    return run_baseline(model, n_trajectories=n_traj, budget=budget, cfg=cfg)


def _run_and_record(args, method, seed, out_dir):
    start = time.perf_counter()
    model = _build_model(args, seed)
    extra = {"method": method}
    if method != "ici":
        extra["budget"] = args.budget
        extra["n_trajectories"] = 1 if method == "baseline-single" else args.n_trajectories
    cfg, echo = _config(args, seed, extra)
    resolved = cfg.resolve(model, model.steady_state())
    echo["alpha"] = resolved.alpha
    echo["stop_tol"] = resolved.stop_tol
    echo["warmup_input_stddev"] = resolved.warmup_input_stddev
    echo["reproj_extra"] = resolved.reproj_extra
    result = _execute_method(model, method, cfg, args)
    ss = model.steady_state()
    verification, distances = verify_controller(model, ss, result.controller, seed)
    outcome = decide_outcome(result, verification)
    wall_ms = (time.perf_counter() - start) * 1000.0
    model_info = {
        "name": args.model,
        "params": _model_params(args),
        "domain": args.domain,
        "state_dim": model.state_dim,
        "input_dim": model.input_dim,
    }
    record = build_record(echo, model_info, method, result, verification, outcome, wall_ms)
    os.makedirs(out_dir, exist_ok=True)
    write_record_json(os.path.join(out_dir, "record.json"), record)
    result.trace.to_csv(os.path.join(out_dir, "trace.csv"))
    write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), distances)
    return record


def cmd_run(args):
    out_dir = os.path.join(_out_root(args), args.model, args.method, f"seed{args.seed}")
    record = _run_and_record(args, args.method, args.seed, out_dir)
    print(
        f"{args.model}/{args.method} seed={args.seed}: outcome={record['outcome']} "
        f"queries={record['total_queries']} -> {out_dir}"
    )
    return 0


def _first_stabilizing_budget(args, method, seed, cap):
    """Smallest budget whose baseline run stabilizes; queries include fallbacks."""
    n_traj = 1 if method == "baseline-single" else args.n_trajectories
    budget = n_traj
    step = max(n_traj, 2 if n_traj == 1 else n_traj)
    while budget <= cap:
        model = _build_model(args, seed)
        cfg = IciConfig(
            max_iters=args.max_iters, stop_tol=args.stop_tol,
            ortho_tol=args.ortho_tol, alpha=args.alpha, rng_seed=seed,
        )
        result = run_baseline(model, n_trajectories=n_traj, budget=budget, cfg=cfg)
        verification, _ = verify_controller(model, model.steady_state(), result.controller, seed)
        if decide_outcome(result, verification) == "stabilized":
            return budget, result.total_queries
        budget += step
    return None, None


def cmd_compare(args):
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(range(args.n_seeds))
    rows = []
    for seed in seeds:
        model = _build_model(args, seed)
        cfg = IciConfig(
            max_iters=args.max_iters, stop_tol=args.stop_tol,
            ortho_tol=args.ortho_tol, alpha=args.alpha, rng_seed=seed,
        )
        ici_result = run_ici(model, cfg=cfg)
        verification, _ = verify_controller(model, model.steady_state(), ici_result.controller, seed)
        ici_ok = decide_outcome(ici_result, verification) == "stabilized"
        q_ici = ici_result.total_queries
        cap = args.cap_factor * max(q_ici, 1)
        row = {"seed": seed, "ici_queries": q_ici, "ici_stabilized": ici_ok}
        for method in ("baseline-single", "baseline-multi"):
            budget, queries = _first_stabilizing_budget(args, method, seed, cap)
            key = method.replace("baseline-", "")
            if budget is None:
                row[f"{key}_queries"] = None
                row[f"{key}_note"] = f"not stabilized within cap {cap}"
            else:
                row[f"{key}_queries"] = queries
                row[f"{key}_ratio"] = queries / q_ici if q_ici else None
        rows.append(row)
        print(f"seed {seed}: ici={q_ici} single={row.get('single_queries')} "
              f"multi={row.get('multi_queries')}")

    def _median(key):
        vals = [r[key] for r in rows if r.get(key) is not None]
        return statistics.median(vals) if vals else None

    summary = {
        "median_ici_queries": _median("ici_queries"),
        "median_single_queries": _median("single_queries"),
        "median_multi_queries": _median("multi_queries"),
    }
    if summary["median_ici_queries"] and summary["median_single_queries"]:
        summary["median_single_ratio"] = (
            summary["median_single_queries"] / summary["median_ici_queries"]
        )
    if summary["median_ici_queries"] and summary["median_multi_queries"]:
        summary["median_multi_ratio"] = (
            summary["median_multi_queries"] / summary["median_ici_queries"]
        )
    out_dir = os.path.join(_out_root(args), args.model, "compare")
    os.makedirs(out_dir, exist_ok=True)
    payload = {"model": args.model, "seeds": seeds, "rows": rows, "summary": summary}
    _atomic_write(os.path.join(out_dir, "compare.json"),
                  json.dumps(payload, sort_keys=True, indent=2) + "\n")
    cols = ["seed", "ici_queries", "single_queries", "multi_queries"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r.get(c) is None else str(r.get(c)) for c in cols))
    _atomic_write(os.path.join(out_dir, "compare.csv"), "\n".join(lines) + "\n")
    print(f"summary: {summary}")
    return 0


def cmd_convergence(args):
    out_dir = os.path.join(_out_root(args), args.model, "convergence", f"seed{args.seed}")
    os.makedirs(out_dir, exist_ok=True)
    traces = {}
    for label, tol in (("small", args.small_tol), ("large", args.large_tol)):
        model = _build_model(args, args.seed)
        cfg = IciConfig(
            max_iters=args.max_iters, stop_tol=args.stop_tol, ortho_tol=tol,
            alpha=args.alpha, rng_seed=args.seed,
        )
        result = run_ici(model, cfg=cfg)
        result.trace.to_csv(os.path.join(out_dir, f"trace_{label}.csv"))
        traces[label] = {
            "ortho_tol": tol,
            "terminated_by": result.terminated_by.value,
            "total_queries": result.total_queries,
            "final_rank": result.basis.rank,
            "reprojections": sum(1 for r in result.trace.rows if r.reproj_used),
            "controller_present": result.controller is not None,
            "initial_distance": result.trace.rows[0].distance if result.trace.rows else None,
            "final_distance": result.trace.rows[-1].distance if result.trace.rows else None,
        }
        print(f"{label}-tolerance run: {traces[label]}")
    _atomic_write(os.path.join(out_dir, "convergence.json"),
                  json.dumps({"model": args.model, "seed": args.seed, "runs": traces},
                             sort_keys=True, indent=2) + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stabkit",
        description="Data-driven stabilization experiments with adaptive sampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one method on one model and record the result")
    _add_common(p_run)
    p_run.add_argument("--method", required=True, choices=METHODS)
    p_run.add_argument("--budget", type=int, default=None, help="baseline sample budget")
    p_run.add_argument("--n-trajectories", type=int, default=4)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="adaptive vs unguided query counts over seeds")
    _add_common(p_cmp)
    p_cmp.add_argument("--seeds", default=None, help="comma-separated seed list")
    p_cmp.add_argument("--n-seeds", type=int, default=5)
    p_cmp.add_argument("--n-trajectories", type=int, default=4)
    p_cmp.add_argument("--cap-factor", type=int, default=30)
    p_cmp.set_defaults(func=cmd_compare)

    p_conv = sub.add_parser(
        "convergence", help="two adaptive runs differing only in the basis tolerance"
    )
    _add_common(p_conv)
    p_conv.add_argument("--small-tol", type=float, default=1e-8)
    p_conv.add_argument("--large-tol", type=float, default=1e-2)
    p_conv.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StabkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
