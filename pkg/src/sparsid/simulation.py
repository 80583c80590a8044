"""Closed-loop trajectory simulation and regression assembly."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import NoiseSpec, SystemModel, make_rng
from .stationary import decay_rate, noise_rhs, solve_discrete_lyapunov

OVERFLOW_LIMIT = 1e12
DEFAULT_BURN_IN_TOL = 1e-8


class SimulationOverflowError(RuntimeError):
    """State magnitude left the range any stable closed loop can produce."""


@dataclass(frozen=True, eq=False)
class TrajectoryData:
    states: np.ndarray  # (T+1, n)
    inputs: np.ndarray  # (T, m)
    seed: object = None
    W: np.ndarray | None = None  # (T, n) disturbances, kept on request
    V: np.ndarray | None = None  # (T, m) input noise, kept on request

    def __post_init__(self):
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise ValueError("need exactly one more state than inputs")

    @property
    def T(self) -> int:
        return self.inputs.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True, eq=False)
class RegressionData:
    X: np.ndarray  # (T, n+m) rows [x(t)^T u(t)^T]
    Y: np.ndarray  # (T, n) rows x(t+1)^T
    W: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.p - self.n


def sample_noise(spec: NoiseSpec, dim: int, rng) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return spec.sample(make_rng(rng), dim)


def burn_in_length(sys: SystemModel, tol: float = DEFAULT_BURN_IN_TOL) -> int:
    rho = decay_rate(sys)
    return max(1, math.ceil(math.log(tol) / math.log(rho)))


def _check_overflow(x, t):
    if not np.max(np.abs(x)) <= OVERFLOW_LIMIT:
        raise SimulationOverflowError(
            f"|x(t)|_inf exceeded {OVERFLOW_LIMIT:.0e} at t={t}; "
            "the closed loop is effectively unstable at this horizon"
        )


def propagate(sys: SystemModel, x0, W, V) -> tuple[np.ndarray, np.ndarray]:
    """Run ``u = K0 x + v``, ``x+ = A x + B u + w`` over given noise sequences.

    Returns ``(states, inputs)`` with ``len(states) == len(W) + 1``.
    """
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    T = W.shape[0]
    states = np.empty((T + 1, sys.n))
    inputs = np.empty((T, sys.m))
    A, B, K0 = sys.A, sys.B, sys.K0
    x = np.asarray(x0, dtype=float).copy()
    states[0] = x
    for t in range(T):
        u = K0 @ x + V[t]
        x = A @ x + B @ u + W[t]
        _check_overflow(x, t + 1)
        inputs[t] = u
        states[t + 1] = x
    return states, inputs


def sample_stationary_initial_state(
    sys: SystemModel,
    w_spec: NoiseSpec,
    v_spec: NoiseSpec,
    tol: float = DEFAULT_BURN_IN_TOL,
    rng=None,
    method: str = "auto",
    size: int | None = None,
) -> np.ndarray:
    """Draw x(0) from (approximately) the stationary law of the closed loop.

    ``method="burn-in"`` runs the recursion from zero for
    ``ceil(log(tol) / log(rho_hat))`` steps; ``"exact"`` (gaussian noise only)
    samples ``N(0, Q*)`` directly. ``"auto"`` uses ``exact`` when both laws are
    gaussian. With ``size`` the result holds ``size`` independent draws as rows.
    """
    rng = make_rng(rng)
    count = 1 if size is None else int(size)
    gaussian = w_spec.family == "gaussian" and v_spec.family == "gaussian"
    if method == "auto":
        method = "exact" if gaussian else "burn-in"
    if method == "exact":
        if not gaussian:
            raise ValueError("exact stationary sampling requires gaussian noise")
        Q = solve_discrete_lyapunov(sys.A_cl, noise_rhs(sys, w_spec, v_spec))
        evals, evecs = np.linalg.eigh(Q)
        root = evecs * np.sqrt(np.clip(evals, 0.0, None))
        x = rng.standard_normal((count, sys.n)) @ root.T
    elif method == "burn-in":
        steps = burn_in_length(sys, tol)
        W = w_spec.sample(rng, (steps, count, sys.n))
        V = v_spec.sample(rng, (steps, count, sys.m))
        x = np.zeros((count, sys.n))
        A_T, B_T, K_T = sys.A.T, sys.B.T, sys.K0.T
        for t in range(steps):
            x = x @ A_T + (x @ K_T + V[t]) @ B_T + W[t]
        _check_overflow(x, steps)
    else:
        raise ValueError(f"unknown method {method!r}")
    return x[0] if size is None else x


def simulate_closed_loop(
    sys: SystemModel,
    w_spec: NoiseSpec,
    v_spec: NoiseSpec,
    T: int,
    rng=None,
    *,
    x0=None,
    init: str = "auto",
    burn_in_tol: float = DEFAULT_BURN_IN_TOL,
    keep_noise: bool = False,
) -> TrajectoryData:
    """Simulate one closed-loop trajectory of length ``T``.

    Draw order on the stream: initial state, then all ``w(t)``, then all ``v(t)``.
    ``x0`` overrides the stationary draw.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    seed = None if isinstance(rng, np.random.Generator) else rng
    gen = make_rng(rng)
    if x0 is None:
        x0 = sample_stationary_initial_state(sys, w_spec, v_spec, burn_in_tol, gen, init)
    else:
        x0 = np.asarray(x0, dtype=float).reshape(sys.n)
    W = w_spec.sample(gen, (T, sys.n))
    V = v_spec.sample(gen, (T, sys.m))
    states, inputs = propagate(sys, x0, W, V)
    return TrajectoryData(
        states, inputs, seed, W if keep_noise else None, V if keep_noise else None
    )


def assemble_regression(traj: TrajectoryData) -> RegressionData:
    T = traj.T
    if T < 1:
        raise ValueError("trajectory must contain at least one transition")
    X = np.hstack([traj.states[:-1], traj.inputs])
    Y = traj.states[1:].copy()
    W = None if traj.W is None else traj.W.copy()
    return RegressionData(X, Y, W)


def write_trajectory_csv(traj: TrajectoryData, path) -> None:
    n, m = traj.n, traj.m
    header = ["t"] + [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(traj.T + 1):
            row = [t] + [repr(float(v)) for v in traj.states[t]]
            if t < traj.T:
                row += [repr(float(v)) for v in traj.inputs[t]]
            else:
                row += [""] * m
            w.writerow(row)


def read_trajectory_csv(path) -> TrajectoryData:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    ucols = [i for i, h in enumerate(header) if h.startswith("u_")]
    body = rows[1:]
    if len(body) < 2:
        raise ValueError(f"{path}: need at least two time steps")
    states = np.array([[float(r[i]) for i in xcols] for r in body])
    inputs = np.array([[float(r[i]) for i in ucols] for r in body[:-1]])
    if any(body[-1][i].strip() for i in ucols):
        raise ValueError(f"{Path(path).name}: final row must leave u columns empty")
    return TrajectoryData(states, inputs.reshape(len(body) - 1, len(ucols)))
