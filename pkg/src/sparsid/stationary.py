"""Stationary second moments of the closed loop and its exponential-decay envelope."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import NoiseSpec, SystemModel, UnstableSystemError, spectral_radius

KRON_MAX_N = 64
_RADIUS_GUARD = 1.0 - 1e-9


@dataclass(frozen=True, eq=False)
class StationaryStats:
    Q_star: np.ndarray
    M_star: np.ndarray
    C: float
    rho: float
    horizon_used: int

    def to_dict(self) -> dict:
        return {
            "Q_star": self.Q_star.tolist(),
            "M_star": self.M_star.tolist(),
            "C": self.C,
            "rho": self.rho,
            "horizon_used": self.horizon_used,
        }


def _check_lyapunov_inputs(A_cl, rhs):
    A_cl = np.asarray(A_cl, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = A_cl.shape[0]
    if A_cl.shape != (n, n) or rhs.shape != (n, n):
        raise ValueError(f"shape mismatch: A_cl {A_cl.shape}, RHS {rhs.shape}")
    if not np.allclose(rhs, rhs.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(rhs).max(initial=0.0))):
        raise ValueError("RHS must be symmetric")
    r = spectral_radius(A_cl)
    if r >= _RADIUS_GUARD:
        raise UnstableSystemError(
            f"Lyapunov equation ill-posed: spectral radius {r:.12g} >= 1 - 1e-9"
        )
    return A_cl, rhs


def _lyap_kron(A, rhs):
    n = A.shape[0]
    # row-major vec: vec(A Q A^T) = (A kron A) vec(Q)
    K = np.eye(n * n) - np.kron(A, A)
    return np.linalg.solve(K, rhs.reshape(-1)).reshape(n, n)


def _lyap_doubling(A, rhs, rel_tol=1e-14, max_iter=200):
    Q = rhs.copy()
    Ak = A.copy()
    for _ in range(max_iter):
        inc = Ak @ Q @ Ak.T
        Q = Q + inc
        if np.linalg.norm(inc) <= rel_tol * np.linalg.norm(Q):
            return Q
        Ak = Ak @ Ak
    raise RuntimeError(f"doubling iteration did not converge in {max_iter} squarings")


def solve_discrete_lyapunov(A_cl, rhs, method: str = "auto") -> np.ndarray:
    """Solve ``A_cl Q A_cl^T - Q + rhs = 0`` for symmetric ``Q``.

    ``method`` is ``"kron"`` (dense vectorised solve), ``"doubling"`` (squaring
    iteration) or ``"auto"``, which picks ``kron`` up to n = 64.
    """
    A_cl, rhs = _check_lyapunov_inputs(A_cl, rhs)
    if method == "auto":
        method = "kron" if A_cl.shape[0] <= KRON_MAX_N else "doubling"
    if method == "kron":
        Q = _lyap_kron(A_cl, rhs)
    elif method == "doubling":
        Q = _lyap_doubling(A_cl, rhs)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * (Q + Q.T)


def lyapunov_residual(A_cl, Q, rhs) -> float:
    """Relative Frobenius residual of a candidate Lyapunov solution."""
    R = A_cl @ Q @ A_cl.T - Q + rhs
    denom = np.linalg.norm(rhs)
    return float(np.linalg.norm(R) / denom) if denom > 0 else float(np.linalg.norm(R))


def noise_rhs(sys: SystemModel, w_spec: NoiseSpec, v_spec: NoiseSpec) -> np.ndarray:
    # second-moment identity: use variances, not sub-Gaussian parameters
    return w_spec.variance * np.eye(sys.n) + v_spec.variance * (sys.B @ sys.B.T)


def build_joint_covariance(Q, K0, sigma_v: float) -> np.ndarray:
    """Covariance of ``[x; K0 x + v]`` given ``Cov(x) = Q`` and ``v`` with std ``sigma_v``."""
    Q = np.asarray(Q, dtype=float)
    K0 = np.asarray(K0, dtype=float)
    m = K0.shape[0]
    QK = Q @ K0.T
    uu = K0 @ QK
    uu = 0.5 * (uu + uu.T) + sigma_v**2 * np.eye(m)
    return np.block([[Q, QK], [QK.T, uu]])


def decay_margin(radius: float) -> float:
    return max(1e-6, 0.01 * (1.0 - radius))


def decay_rate(sys: SystemModel) -> float:
    """Spectral radius of the closed loop plus a small margin, strictly below 1."""
    r = sys.closed_loop_radius
    if r >= 1.0:
        raise UnstableSystemError(f"closed-loop spectral radius {r:.6g} >= 1")
    return min(r + decay_margin(r), 1.0 - 1e-12)


def estimate_stability_constants(sys: SystemModel, tol: float = 1e-8, max_powers: int = 10**6):
    """Return ``(C, rho, horizon_used)`` certifying

    ``||A_cl^t||, ||A_cl^t B||, ||K0 A_cl^t||, ||K0 A_cl^t B|| <= C rho^t``

    (spectral norms) for every ``t`` in ``0..horizon_used``. Powers are scanned
    until ``||A_cl^t|| <= tol``.
    """
    rho = decay_rate(sys)
    log_rho = math.log(rho)
    A_cl, B, K0 = sys.A_cl, sys.B, sys.K0
    use_k = np.any(K0 != 0)
    use_b = np.any(B != 0)
    P = np.eye(sys.n)
    log_c = 0.0
    for tau in range(max_powers + 1):
        norms = [np.linalg.norm(P, 2)]
        if use_b:
            PB = P @ B
            norms.append(np.linalg.norm(PB, 2))
        if use_k:
            KP = K0 @ P
            norms.append(np.linalg.norm(KP, 2))
            if use_b:
                norms.append(np.linalg.norm(KP @ B, 2))
        for v in norms:
            if v > 0:
                log_c = max(log_c, math.log(v) - tau * log_rho)
        if norms[0] <= tol:
            return math.exp(log_c), rho, tau
        P = A_cl @ P
    raise RuntimeError(f"||A_cl^t|| did not drop below {tol} within {max_powers} powers")


def stationary_covariances(sys: SystemModel, w_spec: NoiseSpec, v_spec: NoiseSpec):
    """``(Q*, M*)`` without the stability-constant scan."""
    Q = solve_discrete_lyapunov(sys.A_cl, noise_rhs(sys, w_spec, v_spec))
    return Q, build_joint_covariance(Q, sys.K0, v_spec.std)


def stationary_stats(
    sys: SystemModel, w_spec: NoiseSpec, v_spec: NoiseSpec, tol: float = 1e-8
) -> StationaryStats:
    Q, M = stationary_covariances(sys, w_spec, v_spec)
    C, rho, horizon = estimate_stability_constants(sys, tol)
    for arr in (Q, M):
        arr.setflags(write=False)
    return StationaryStats(Q, M, C, rho, horizon)
