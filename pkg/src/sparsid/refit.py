"""Unpenalized least-squares fits: support-restricted refit and the full baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .simulation import RegressionData

QR_COND_THRESHOLD = 1e6


class UnderdeterminedError(ValueError):
    """Least squares is not well defined with fewer samples than unknowns per column."""


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class RefinedEstimate:
    Psi_hat_ls: np.ndarray
    support_used: list
    conditioning: np.ndarray  # condition number of each restricted Gram block (nan if empty)
    failed_columns: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed_columns


def _restricted_solve(XA, y):
    G = XA.T @ XA
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or np.linalg.matrix_rank(XA) < XA.shape[1]:
        raise RankDeficientError("restricted design is rank deficient")
    if cond > QR_COND_THRESHOLD:
        Qf, R = linalg.qr(XA, mode="economic")
        coef = linalg.solve_triangular(R, Qf.T @ y)
    else:
        coef = linalg.cho_solve(linalg.cho_factor(G), XA.T @ y)
    return coef, cond


def restricted_least_squares(data: RegressionData, supports) -> RefinedEstimate:
    """Per column ``j``, least squares of ``Y[:, j]`` on the columns ``supports[j]`` of ``X``.

    Entries outside the support are exactly zero. Columns whose restricted design
    is rank deficient (or larger than T) are left at zero and listed in
    ``failed_columns``.
    """
    X, Y = data.X, data.Y
    T, p = X.shape
    n = Y.shape[1]
    if len(supports) != n:
        raise ValueError(f"need {n} supports, got {len(supports)}")
    Psi = np.zeros((p, n))
    cond = np.full(n, np.nan)
    used, failed = [], []
    for j, S in enumerate(supports):
        S = np.asarray(sorted(int(i) for i in S), dtype=int)
        used.append(S)
        if S.size == 0:
            continue
        if S.size > T:
            failed.append(j)
            continue
        try:
            coef, cond[j] = _restricted_solve(X[:, S], Y[:, j])
        except (RankDeficientError, np.linalg.LinAlgError):
            failed.append(j)
            continue
        Psi[S, j] = coef
    return RefinedEstimate(Psi, used, cond, failed)


def full_least_squares(data: RegressionData) -> np.ndarray:
    """Ordinary least squares over every regressor; needs ``T >= n + m``."""
    X, Y = data.X, data.Y
    T, p = X.shape
    if T < p:
        raise UnderdeterminedError(
            f"least squares is underdetermined: T={T} < n+m={p}"
        )
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficientError("design matrix X does not have full column rank")
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef
