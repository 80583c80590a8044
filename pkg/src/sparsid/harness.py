"""Experiment driver: support-recovery sweeps, estimator comparison and the gamma study.

Conventions (also written to ``meta.json``):

* RLT = T / (n + m)
* RME = mismatch / ((n + m) n)
* normalized l2 error = ||Psi_hat - Psi*||_F / ||Psi*||_F
"""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import paper_lambda, theorem1_lambda, theory_params
from .diagnostics import check_mutual_incoherence, support_sets
from .lasso import LassoOptions, estimate_lasso
from .models import NoiseSpec, make_rng
from .powergrid import V_VARIANCE, W_VARIANCE, default_noise, generate_instance
from .refit import UnderdeterminedError, full_least_squares, restricted_least_squares
from .simulation import assemble_regression, simulate_closed_loop
from .stationary import stationary_covariances

log = logging.getLogger(__name__)

LAMBDA_RULES = ("paper", "theorem1", "fixed")

RESULT_COLUMNS = [
    "N_g", "n", "m", "T", "RLT", "trial", "estimator", "lambda",
    "mismatch", "RME", "linf_error", "l2_error_normalized",
    "recovery_success", "status", "seconds", "error",
]
TIMING_COLUMNS = ("seconds",)

# reference values reported for the full-scale study; not reproducible at desk scale
PAPER_REFERENCE = {
    "min_RLT_for_RME_0.1pct": {100: 3.83, 200: 1.42, 400: 0.50, 800: 0.16},
    "lasso_over_lasso_ls_error_ratio": 1.91,
    "gamma_violation_rate_N200": 0.0515,
}


def _mask(support, shape):
    if isinstance(support, np.ndarray) and support.dtype == bool:
        if support.shape != shape:
            raise ValueError(f"support mask shape {support.shape} != {shape}")
        return support
    out = np.zeros(shape, dtype=bool)
    if len(support) != shape[1]:
        raise ValueError(f"need {shape[1]} per-column supports, got {len(support)}")
    for j, S in enumerate(support):
        out[np.asarray(list(S), dtype=int), j] = True
    return out


def mismatch_error(support_true, support_est, shape=None) -> int:
    """False positives plus false negatives between two sparsity patterns.

    Supports are boolean masks, or per-column index collections together with ``shape``.
    """
    if shape is None:
        shape = np.shape(support_true)
    t = _mask(support_true, shape)
    e = _mask(support_est, shape)
    return int(np.count_nonzero(t != e))


def normalized_l2_error(Psi_hat, Psi_star) -> float:
    return float(np.linalg.norm(np.asarray(Psi_hat) - Psi_star) / np.linalg.norm(Psi_star))


def linf_error(Psi_hat, Psi_star) -> float:
    return float(np.max(np.abs(np.asarray(Psi_hat) - Psi_star)))


@dataclass
class SweepConfig:
    generators: list = field(default_factory=lambda: [20])
    T_grid: list = field(default_factory=lambda: [200, 500, 1000, 2000])
    trials: int = 10
    lambda_rule: str = "paper"
    lambda_value: float | None = None
    seed: int = 0
    tol: float = 1e-8
    max_sweeps: int = 100_000
    delta: float = 0.05
    jobs: int = 1
    w_variance: float = W_VARIANCE
    v_variance: float = V_VARIANCE
    instances: int = 200  # gamma study only
    bins: int = 50  # gamma study only

    def __post_init__(self):
        self.generators = [int(g) for g in self.generators]
        self.T_grid = [int(t) for t in self.T_grid]
        if not self.generators or not self.T_grid:
            raise ValueError("generator and T grids must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.lambda_rule not in LAMBDA_RULES:
            raise ValueError(f"lambda_rule must be one of {LAMBDA_RULES}")
        if self.lambda_rule == "fixed" and self.lambda_value is None:
            raise ValueError("lambda_rule 'fixed' needs lambda_value")
        if self.w_variance < 0 or self.v_variance < 0:
            raise ValueError("noise variances must be >= 0")

    def noise(self):
        return NoiseSpec.gaussian_var(self.w_variance), NoiseSpec.gaussian_var(self.v_variance)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        return cls(**json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepResult:
    rows: list
    config: SweepConfig
    kind: str

    @property
    def hard_failures(self) -> int:
        return sum(r["status"] in ("failed", "nonconverged") for r in self.rows)

    def column(self, name, **where) -> np.ndarray:
        sel = [r for r in self.rows if all(r[k] == v for k, v in where.items())]
        return np.array([r[name] for r in sel], dtype=float)


def instance_seed(seed: int, N_g: int, trial: int):
    return (seed, 0, N_g, trial)


def trajectory_seed(seed: int, N_g: int, trial: int, T: int):
    return (seed, 1, N_g, trial, T)


def choose_lambda(cfg: SweepConfig, system, w_spec, v_spec, T: int) -> float:
    if cfg.lambda_rule == "paper":
        return paper_lambda(system.n, system.m, T)
    if cfg.lambda_rule == "fixed":
        return float(cfg.lambda_value)
    return theorem1_lambda(theory_params(system, w_spec, v_spec, cfg.delta), T)


def _base_row(N_g, system, T, trial):
    n, m = system.n, system.m
    return {"N_g": N_g, "n": n, "m": m, "T": T, "RLT": T / (n + m), "trial": trial}


def _score(row, Psi, Psi_star, support_mask):
    n_cells = Psi_star.size
    mis = mismatch_error(Psi_star != 0, support_mask)
    row.update(
        mismatch=mis,
        RME=mis / n_cells,
        linf_error=linf_error(Psi, Psi_star),
        l2_error_normalized=normalized_l2_error(Psi, Psi_star),
        recovery_success=int(mis == 0),
    )
    return row


def _empty_metrics(row):
    row.update(mismatch="", RME="", linf_error="", l2_error_normalized="", recovery_success="")
    return row


def run_cell(cfg: SweepConfig, N_g: int, T: int, trial: int, compare: bool = False) -> list:
    """One (N_g, T, trial) cell: fresh instance, fresh trajectory, identify, score."""
    t0 = time.perf_counter()
    w_spec, v_spec = cfg.noise()
    base = {"N_g": N_g, "n": 2 * N_g, "m": N_g, "T": T, "RLT": T / (3 * N_g), "trial": trial}
    try:
        inst = generate_instance(N_g, make_rng(instance_seed(cfg.seed, N_g, trial)))
        system = inst.system
        base = _base_row(N_g, system, T, trial)
        traj = simulate_closed_loop(system, w_spec, v_spec, T, trajectory_seed(cfg.seed, N_g, trial, T))
        data = assemble_regression(traj)
        lam = choose_lambda(cfg, system, w_spec, v_spec, T)
        est = estimate_lasso(data, LassoOptions(lam, cfg.max_sweeps, cfg.tol))
    except Exception as exc:  # a failed cell is recorded, never fatal
        log.exception("cell N_g=%d T=%d trial=%d failed", N_g, T, trial)
        row = _empty_metrics({**base, "estimator": "LASSO", "lambda": ""})
        row.update(status="failed", seconds=time.perf_counter() - t0, error=repr(exc))
        return [row]
    Psi_star = system.Psi_star
    status = "ok" if est.all_converged else "nonconverged"
    rows = [_score({**base, "estimator": "LASSO", "lambda": lam, "status": status},
                   est.Psi_hat, Psi_star, est.support_mask)]
    if compare:
        ref = restricted_least_squares(data, est.support)
        st = "ok" if ref.ok else "rank_deficient"
        rows.append(_score({**base, "estimator": "LASSO+LS", "lambda": lam, "status": st},
                           ref.Psi_hat_ls, Psi_star, est.support_mask))
        row = {**base, "estimator": "LS", "lambda": 0.0}
        try:
            Psi_ls = full_least_squares(data)
            rows.append(_score({**row, "status": "ok"}, Psi_ls, Psi_star, Psi_ls != 0))
        except UnderdeterminedError:
            rows.append(_empty_metrics({**row, "status": "underdetermined"}))
    elapsed = time.perf_counter() - t0
    for r in rows:
        r["seconds"] = elapsed
    return rows


def _cells(cfg):
    for N_g in cfg.generators:
        for T in cfg.T_grid:
            for trial in range(cfg.trials):
                yield N_g, T, trial


def _run_cell_args(args):
    return run_cell(*args)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


class _CsvSink:
    def __init__(self, path, columns):
        self.fh = None
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            self.fh = open(path, "w", newline="")
            self.writer = csv.DictWriter(self.fh, fieldnames=columns, extrasaction="ignore")
            self.writer.writeheader()

    def write(self, row):
        if self.fh is not None:
            self.writer.writerow({k: _fmt(v) for k, v in row.items()})
            self.fh.flush()

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _sweep(cfg: SweepConfig, kind: str, compare: bool, out_dir) -> SweepResult:
    out_dir = Path(out_dir) if out_dir is not None else None
    sink = _CsvSink(out_dir / "results.csv" if out_dir else None, RESULT_COLUMNS)
    args = [(cfg, N_g, T, trial, compare) for N_g, T, trial in _cells(cfg)]
    rows = []
    try:
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                results = pool.map(_run_cell_args, args)
                for cell_rows in results:  # map preserves cell order
                    for r in cell_rows:
                        sink.write(r)
                        rows.append(r)
        else:
            for a in args:
                for r in run_cell(*a):
                    sink.write(r)
                    rows.append(r)
    finally:
        sink.close()
    result = SweepResult(rows, cfg, kind)
    if out_dir is not None:
        write_meta(out_dir / "meta.json", cfg, kind, result)
    return result


def run_recovery_sweep(cfg: SweepConfig, out_dir=None) -> SweepResult:
    return _sweep(cfg, "recovery", False, out_dir)


def run_estimator_comparison(cfg: SweepConfig, out_dir=None) -> SweepResult:
    return _sweep(cfg, "compare", True, out_dir)


@dataclass
class GammaHistogram:
    N_g: int
    gammas: np.ndarray
    counts: np.ndarray
    edges: np.ndarray

    @property
    def violation_fraction(self) -> float:
        return float(np.mean(self.gammas <= 0)) if self.gammas.size else math.nan


def instance_gamma(N_g: int, seed) -> float:
    inst = generate_instance(N_g, make_rng(seed))
    w_spec, v_spec = default_noise()
    _, M = stationary_covariances(inst.system, w_spec, v_spec)
    return check_mutual_incoherence(M, support_sets(inst.system.Psi_star))


def iter_gammas(N_g: int, instances: int, seed: int = 0):
    for i in range(instances):
        yield i, instance_gamma(N_g, (seed, 2, N_g, i))


def run_gamma_histogram(cfg: SweepConfig, out_dir=None) -> list:
    """gamma for ``cfg.instances`` random instances per generator count, binned."""
    out_dir = Path(out_dir) if out_dir is not None else None
    results = []
    sink = _CsvSink(out_dir / "gamma.csv" if out_dir else None, ["N_g", "instance", "gamma", "violated"])
    try:
        for N_g in cfg.generators:
            gammas = []
            for i, g in iter_gammas(N_g, cfg.instances, cfg.seed):
                gammas.append(g)
                sink.write({"N_g": N_g, "instance": i, "gamma": g, "violated": int(g <= 0)})
            gammas = np.array(gammas)
            finite = gammas[np.isfinite(gammas)]
            lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
            if hi <= lo:
                lo, hi = lo - 0.5, hi + 0.5
            counts, edges = np.histogram(finite, bins=cfg.bins, range=(lo, hi))
            results.append(GammaHistogram(N_g, gammas, counts, edges))
    finally:
        sink.close()
    if out_dir is not None:
        with open(out_dir / "histogram.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N_g", "bin_left", "bin_right", "count"])
            for h in results:
                for a, b, c in zip(h.edges[:-1], h.edges[1:], h.counts):
                    w.writerow([h.N_g, repr(float(a)), repr(float(b)), int(c)])
        write_meta(out_dir / "meta.json", cfg, "gamma", None, extra={
            "violation_fraction": {str(h.N_g): h.violation_fraction for h in results},
        })
    return results


def write_meta(path, cfg: SweepConfig, kind: str, result: SweepResult | None, extra=None) -> None:
    meta = {
        "kind": kind,
        "config": cfg.to_dict(),
        "solver": {"method": "cyclic coordinate descent", "kkt_tol": cfg.tol, "max_sweeps": cfg.max_sweeps},
        "instance_generator": {"tree_sampler": "uniform-attachment", "max_degree": 10, "dt": 0.1},
        "noise": {k: v.to_dict() for k, v in zip(("w", "v"), cfg.noise())},
        "conventions": {
            "RLT": "T / (n + m)",
            "RME": "mismatch / ((n + m) * n)",
            "l2_error_normalized": "||Psi_hat - Psi*||_F / ||Psi*||_F",
            "log": "natural",
            "support": "exact zeros of the estimate",
        },
        "reference_values": PAPER_REFERENCE,
        "versions": {
            "sparsid": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    if result is not None:
        meta["cells"] = len(result.rows)
        meta["hard_failures"] = result.hard_failures
    if extra:
        meta.update(extra)
    Path(path).write_text(json.dumps(meta, indent=2, default=str))
