"""Command-line entry point: ``sparsid generate|simulate|identify|check|sweep``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import paper_lambda, theorem1_lambda, theory_params
from .diagnostics import assumption_report
from .harness import (
    SweepConfig,
    iter_gammas,
    run_estimator_comparison,
    run_gamma_histogram,
    run_recovery_sweep,
)
from .lasso import LassoOptions, estimate_lasso
from .models import NoiseSpec, SystemModel, make_rng
from .powergrid import default_noise, generate_instance
from .refit import restricted_least_squares
from .simulation import (
    assemble_regression,
    read_trajectory_csv,
    simulate_closed_loop,
    write_trajectory_csv,
)
from .stationary import stationary_stats


def _noise_args(p):
    w0, v0 = default_noise()
    p.add_argument("--noise-family", default="gaussian", help="gaussian | uniform | rademacher")
    p.add_argument("--w-scale", type=float, default=w0.scale, help="disturbance scale (default %(default).4g)")
    p.add_argument("--v-scale", type=float, default=v0.scale, help="input-noise scale (default %(default).4g)")


def _noise(args):
    return NoiseSpec(args.noise_family, args.w_scale), NoiseSpec(args.noise_family, args.v_scale)


def _emit(payload: dict, out):
    text = json.dumps(payload, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text)
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def cmd_generate(args) -> int:
    inst = generate_instance(args.generators, make_rng(args.seed), max_degree=args.max_degree)
    payload = inst.to_dict()
    payload["metadata"]["seed"] = args.seed
    _emit(payload, args.out)
    return 0


def cmd_simulate(args) -> int:
    system = SystemModel.load(args.system)
    w_spec, v_spec = _noise(args)
    traj = simulate_closed_loop(system, w_spec, v_spec, args.T, args.seed, init=args.init)
    write_trajectory_csv(traj, args.out)
    return 0


def cmd_identify(args) -> int:
    data = assemble_regression(read_trajectory_csv(args.trajectory))
    diagnostics = {"T": data.T, "n": data.n, "m": data.m}
    if args.lam is not None:
        lam, rule = args.lam, "fixed"
    elif args.lambda_rule == "paper":
        lam, rule = paper_lambda(data.n, data.m, data.T), "paper"
    else:
        if not args.system:
            print("error: --lambda-rule theorem1 needs --system", file=sys.stderr)
            return 2
        system = SystemModel.load(args.system)
        params = theory_params(system, *_noise(args), args.delta)
        lam, rule = theorem1_lambda(params, data.T), "theorem1"
        diagnostics["theory_params"] = params.to_dict()
    est = estimate_lasso(data, LassoOptions(lam, args.max_sweeps, args.tol))
    diagnostics.update(
        lambda_value=lam,
        lambda_rule=rule,
        solver="cyclic coordinate descent",
        tol=args.tol,
        max_sweeps=args.max_sweeps,
        kkt_residuals=est.kkt_residuals,
        sweeps_used=est.sweeps_used,
        converged=est.converged,
    )
    payload = {
        "Psi_hat": est.Psi_hat,
        "support": [s.tolist() for s in est.support],
        "diagnostics": diagnostics,
    }
    if args.post_ls:
        ref = restricted_least_squares(data, est.support)
        payload["psi_hat_ls"] = ref.Psi_hat_ls
        diagnostics["post_ls_failed_columns"] = ref.failed_columns
        diagnostics["post_ls_conditioning"] = [None if np.isnan(c) else c for c in ref.conditioning]
    _emit(payload, args.out)
    return 0 if est.all_converged else 1


def cmd_check(args) -> int:
    if args.histogram:
        out = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            w = csv.writer(out)
            w.writerow(["N_g", "instance", "gamma"])
            for i, g in iter_gammas(args.generators, args.instances, args.seed):
                w.writerow([args.generators, i, repr(g)])
        finally:
            if args.out:
                out.close()
        return 0
    if not args.system:
        print("error: check needs --system (or --histogram gamma)", file=sys.stderr)
        return 2
    system = SystemModel.load(args.system)
    w_spec, v_spec = _noise(args)
    stats = stationary_stats(system, w_spec, v_spec)
    X = None
    if args.trajectory:
        X = assemble_regression(read_trajectory_csv(args.trajectory)).X
    report = assumption_report(system.Psi_star, stats.M_star, X)
    payload = {"stationary": stats.to_dict(), "assumptions": report.to_dict()}
    _emit(payload, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = SweepConfig.from_json(args.config) if args.config else SweepConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.study == "gamma":
        run_gamma_histogram(cfg, out)
        return 0
    runner = run_recovery_sweep if args.study == "recovery" else run_estimator_comparison
    result = runner(cfg, out)
    return 0 if result.hard_failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparsid", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a random swing-equation network")
    g.add_argument("--generators", "-N", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-degree", type=int, default=10)
    g.add_argument("--out", "-o")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="simulate one closed-loop trajectory to CSV")
    s.add_argument("--system", required=True)
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init", choices=["auto", "exact", "burn-in"], default="auto")
    s.add_argument("--out", "-o", required=True)
    _noise_args(s)
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("identify", help="estimate (A, B) from a trajectory CSV")
    i.add_argument("trajectory")
    lam = i.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float)
    lam.add_argument("--lambda-rule", choices=["paper", "theorem1"], default="paper")
    i.add_argument("--system", help="true system JSON (theorem1 rule only)")
    i.add_argument("--delta", type=float, default=0.05)
    i.add_argument("--tol", type=float, default=1e-8)
    i.add_argument("--max-sweeps", type=int, default=100_000)
    i.add_argument("--post-ls", action="store_true", help="refit by least squares on the recovered support")
    i.add_argument("--out", "-o")
    _noise_args(i)
    i.set_defaults(func=cmd_identify)

    c = sub.add_parser("check", help="stationary statistics and assumption diagnostics")
    c.add_argument("--system")
    c.add_argument("--trajectory", help="trajectory CSV for the design-matrix coherence")
    c.add_argument("--histogram", choices=["gamma"])
    c.add_argument("--instances", type=int, default=200)
    c.add_argument("--generators", "-N", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", "-o")
    _noise_args(c)
    c.set_defaults(func=cmd_check)

    w = sub.add_parser("sweep", help="run an experiment study")
    w.add_argument("study", choices=["recovery", "compare", "gamma"])
    w.add_argument("--config")
    w.add_argument("--seed", type=int)
    w.add_argument("--jobs", type=int)
    w.add_argument("--out", "-o", default="results")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
