"""Column-wise Lasso by cyclic coordinate descent, certified by the KKT residual.

Each column solves ``min_psi (1/2T) ||y - X psi||^2 + lam ||psi||_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .simulation import RegressionData

GRAM_MAX_P = 2000


@dataclass(frozen=True)
class LassoOptions:
    lam: float
    max_sweeps: int = 100_000
    tol: float = 1e-8
    support_threshold: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.support_threshold < 0:
            raise ValueError("support_threshold must be >= 0")


class ColumnFit(NamedTuple):
    psi: np.ndarray
    kkt_residual: float
    sweeps: int
    converged: bool


@dataclass(frozen=True, eq=False)
class EstimateResult:
    Psi_hat: np.ndarray  # (n+m, n)
    support: list  # per column, sorted index arrays
    kkt_residuals: np.ndarray
    sweeps_used: np.ndarray
    converged: np.ndarray
    lam: float

    @property
    def support_mask(self) -> np.ndarray:
        return self.Psi_hat != 0

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def soft_threshold(z, t):
    """``sign(z) * max(|z| - t, 0)``; works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be >= 0")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _kkt_from_grad(g: np.ndarray, psi: np.ndarray, lam: float) -> float:
    on = psi != 0
    r_on = np.abs(g[on] + lam * np.sign(psi[on]))
    r_off = np.maximum(np.abs(g[~on]) - lam, 0.0)
    return float(max(r_on.max(initial=0.0), r_off.max(initial=0.0)))


def kkt_residual(X, y, psi_hat, lam: float) -> float:
    """Largest violation of the Lasso stationarity conditions at ``psi_hat``.

    With ``g = (1/T) X^T (X psi - y)``: ``|g_i + lam sign(psi_i)|`` on the
    support and ``max(|g_i| - lam, 0)`` off it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    psi_hat = np.asarray(psi_hat, dtype=float)
    g = X.T @ (X @ psi_hat - y) / X.shape[0]
    return _kkt_from_grad(g, psi_hat, lam)


def _sweep(G, diag, grad, psi, lam, idx):
    for i in idx:
        d = diag[i]
        if d <= 0.0:
            continue
        old = psi[i]
        new = _soft(old - grad[i] / d, lam / d)
        if new != old:
            psi[i] = new
            grad += G[i] * (new - old)


def _cd_gram(G, c, lam, tol, max_sweeps):
    p = c.shape[0]
    diag = np.diag(G).copy()
    psi = np.zeros(p)
    grad = -c.copy()
    everything = range(p)
    sweeps = 0
    kkt = math.inf
    while sweeps < max_sweeps:
        _sweep(G, diag, grad, psi, lam, everything)
        sweeps += 1
        grad = G @ psi - c
        kkt = _kkt_from_grad(grad, psi, lam)
        if kkt <= tol:
            return psi, sweeps, True
        # cycle on the active set until it is locally optimal, then re-check everything
        active = np.flatnonzero(psi)
        while sweeps < max_sweeps and active.size:
            _sweep(G, diag, grad, psi, lam, active)
            sweeps += 1
            a = psi[active] != 0
            r = np.where(
                a,
                np.abs(grad[active] + lam * np.sign(psi[active])),
                np.maximum(np.abs(grad[active]) - lam, 0.0),
            )
            if r.max() <= 0.1 * tol:
                break
    return psi, sweeps, False


def _cd_residual(X, y, lam, tol, max_sweeps):
    T, p = X.shape
    col_sq = np.einsum("ij,ij->j", X, X) / T
    psi = np.zeros(p)
    r = y.copy()
    sweeps = 0
    while sweeps < max_sweeps:
        for i in range(p):
            d = col_sq[i]
            if d <= 0.0:
                continue
            xi = X[:, i]
            gi = -(xi @ r) / T
            old = psi[i]
            new = _soft(old - gi / d, lam / d)
            if new != old:
                psi[i] = new
                r -= xi * (new - old)
        sweeps += 1
        r = y - X @ psi
        if _kkt_from_grad(-(X.T @ r) / T, psi, lam) <= tol:
            return psi, sweeps, True
    return psi, sweeps, False


def _solve(X, y, G, opts: LassoOptions) -> ColumnFit:
    T = X.shape[0]
    if G is not None:
        c = X.T @ y / T
        psi, sweeps, ok = _cd_gram(G, c, opts.lam, opts.tol, opts.max_sweeps)
    else:
        psi, sweeps, ok = _cd_residual(X, y, opts.lam, opts.tol, opts.max_sweeps)
    if opts.support_threshold > 0:
        psi[np.abs(psi) <= opts.support_threshold] = 0.0
    psi[psi == 0] = 0.0  # no signed zeros in output
    return ColumnFit(psi, kkt_residual(X, y, psi, opts.lam), sweeps, ok)


def _gram(X):
    T, p = X.shape
    return X.T @ X / T if p <= GRAM_MAX_P else None


def _validate(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a T x p matrix with T >= 1")
    if Y.shape[0] != X.shape[0]:
        raise ValueError(f"row mismatch: X has {X.shape[0]}, y has {Y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("X and y must be finite")
    return X, Y


def lasso_column(X, y, opts: LassoOptions) -> ColumnFit:
    X, y = _validate(X, y)
    return _solve(X, y.reshape(-1), _gram(X), opts)


def estimate_lasso(data: RegressionData, opts: LassoOptions) -> EstimateResult:
    """Solve every column of ``Y`` independently against the shared design ``X``."""
    X, Y = _validate(data.X, data.Y)
    G = _gram(X)
    n = Y.shape[1]
    Psi = np.zeros((X.shape[1], n))
    kkt = np.zeros(n)
    sweeps = np.zeros(n, dtype=int)
    conv = np.zeros(n, dtype=bool)
    for j in range(n):
        fit = _solve(X, Y[:, j].copy(), G, opts)
        Psi[:, j] = fit.psi
        kkt[j], sweeps[j], conv[j] = fit.kkt_residual, fit.sweeps, fit.converged
    support = [np.flatnonzero(Psi[:, j]) for j in range(n)]
    return EstimateResult(Psi, support, kkt, sweeps, conv, opts.lam)


def lasso_objective(X, y, psi, lam: float) -> float:
    r = np.asarray(y) - np.asarray(X) @ psi
    return float(r @ r / (2 * len(r)) + lam * np.abs(psi).sum())
