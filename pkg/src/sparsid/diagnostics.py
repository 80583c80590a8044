"""Support structure, incoherence/eigenvalue/norm conditions, coherence and the l0 oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np


class SingularBlockError(np.linalg.LinAlgError):
    def __init__(self, column: int):
        super().__init__(f"restricted block M*[A_j, A_j] is singular for column j={column}")
        self.column = column


class OracleTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SparsityStats:
    supports: list  # per column of Psi*, sorted index arrays
    k: int
    nnz: int
    p: int  # number of rows of Psi* (n + m)

    @property
    def n_columns(self) -> int:
        return len(self.supports)


def support_sets(Psi_star, threshold: float = 0.0) -> SparsityStats:
    """Per-column nonzero sets of ``Psi_star``; ``|entry| > threshold`` counts as nonzero."""
    P = np.asarray(Psi_star, dtype=float)
    mask = np.abs(P) > threshold
    supports = [np.flatnonzero(mask[:, j]) for j in range(P.shape[1])]
    k = max((s.size for s in supports), default=0)
    return SparsityStats(supports, int(k), int(mask.sum()), P.shape[0])


def _blocks(M, stats: SparsityStats):
    """Yield ``(j, A, Ac, M_AA)`` for every column with a nonempty support."""
    M = np.asarray(M, dtype=float)
    everything = np.arange(M.shape[0])
    for j, A in enumerate(stats.supports):
        if A.size == 0:
            continue
        yield j, A, np.setdiff1d(everything, A), M[np.ix_(A, A)]


def _inverse(block, j):
    try:
        inv = np.linalg.inv(block)
    except np.linalg.LinAlgError:
        raise SingularBlockError(j) from None
    if not np.all(np.isfinite(inv)) or np.linalg.cond(block) > 1e14:
        raise SingularBlockError(j)
    return inv


def check_mutual_incoherence(M_star, stats: SparsityStats) -> float:
    """Margin ``gamma = 1 - max_j max_{i not in A_j} ||M_{i,A_j} M_{A_j,A_j}^{-1}||_1``.

    ``gamma <= 0`` means the incoherence condition fails.
    """
    M = np.asarray(M_star, dtype=float)
    worst = 0.0
    for j, A, Ac, MAA in _blocks(M, stats):
        if Ac.size == 0:
            continue
        _inverse(MAA, j)
        # rows of M_{Ac,A} M_AA^{-1}
        coeffs = np.linalg.solve(MAA.T, M[np.ix_(Ac, A)].T).T
        worst = max(worst, float(np.abs(coeffs).sum(axis=1).max()))
    return 1.0 - worst


def check_min_eigenvalue(M_star, stats: SparsityStats) -> float:
    vals = [np.linalg.eigvalsh(MAA)[0] for _, _, _, MAA in _blocks(M_star, stats)]
    return float(min(vals)) if vals else math.nan


def check_inf_norm(M_star, stats: SparsityStats) -> float:
    vals = [np.abs(_inverse(MAA, j)).sum(axis=1).max() for j, _, _, MAA in _blocks(M_star, stats)]
    return float(max(vals)) if vals else math.nan


def check_min_gap(Psi_star, stats: SparsityStats):
    """Return ``(max_variant, min_variant, empty_columns)``.

    ``max_variant`` is ``min_j max_{i in A_j} |Psi_ij|``; ``min_variant`` uses the
    smallest nonzero magnitude per column instead. Columns with empty support are
    skipped and reported.
    """
    P = np.abs(np.asarray(Psi_star, dtype=float))
    big, small, empty = [], [], []
    for j, A in enumerate(stats.supports):
        if A.size == 0:
            empty.append(j)
            continue
        big.append(P[A, j].max())
        small.append(P[A, j].min())
    if not big:
        return math.nan, math.nan, empty
    return float(min(big)), float(min(small)), empty


def mutual_coherence(X) -> float:
    """Largest absolute cosine between two distinct columns of ``X``."""
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ValueError(f"zero column(s) at {np.flatnonzero(norms == 0).tolist()}")
    if X.shape[1] < 2:
        return 0.0
    C = np.abs(X.T @ X) / np.outer(norms, norms)
    np.fill_diagonal(C, 0.0)
    return float(min(C.max(), 1.0))


def coherence_limit(M_star) -> float:
    M = np.asarray(M_star, dtype=float)
    d = np.diag(M)
    if np.any(d <= 0):
        raise ValueError("coherence limit needs a strictly positive diagonal")
    if M.shape[0] < 2:
        return 0.0
    C = np.abs(M) / np.sqrt(np.outer(d, d))
    np.fill_diagonal(C, 0.0)
    return float(C.max())


def identifiability_check(stats: SparsityStats, mu: float) -> np.ndarray:
    """Per column, ``||Psi_j||_0 < (1 + 1/mu) / 2`` (always true when ``mu == 0``)."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    sizes = np.array([s.size for s in stats.supports])
    if mu == 0:
        return np.ones(sizes.shape, dtype=bool)
    return sizes < 0.5 * (1.0 + 1.0 / mu)


ORACLE_MAX_P = 14
ORACLE_MAX_SUPPORT = 4
ORACLE_RTOL = 1e-8


def oracle_l0(X, Y_minus_W, max_support: int = 3) -> np.ndarray:
    """Sparsest exact solution of ``X Psi = Y - W`` by enumeration, column by column.

    Supports are tried by increasing size and lexicographic order; the first whose
    least-squares residual is within ``1e-8 * ||Y - W||`` wins. Columns with no
    such support up to ``max_support`` come back as NaN.
    """
    X = np.asarray(X, dtype=float)
    R = np.asarray(Y_minus_W, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    p = X.shape[1]
    if p > ORACLE_MAX_P or max_support > ORACLE_MAX_SUPPORT:
        raise OracleTooLargeError(
            f"instance too large for l0 oracle (n+m={p} <= {ORACLE_MAX_P}, "
            f"max_support={max_support} <= {ORACLE_MAX_SUPPORT} required)"
        )
    tol = ORACLE_RTOL * np.linalg.norm(R)
    out = np.full((p, R.shape[1]), np.nan)
    for j in range(R.shape[1]):
        r = R[:, j]
        if np.linalg.norm(r) <= tol:
            out[:, j] = 0.0
            continue
        for size in range(1, max_support + 1):
            hit = None
            for S in itertools.combinations(range(p), size):
                XS = X[:, S]
                coef, *_ = np.linalg.lstsq(XS, r, rcond=None)
                if np.linalg.norm(r - XS @ coef) <= tol:
                    hit = (S, coef)
                    break
            if hit is not None:
                out[:, j] = 0.0
                out[list(hit[0]), j] = hit[1]
                break
    return out


@dataclass(frozen=True)
class AssumptionReport:
    gamma: float
    C_min: float
    D_max: float
    Psi_min_max_variant: float
    Psi_min_min_variant: float
    k: int
    mu_design: float | None
    mu_limit: float
    identifiable_columns: list
    empty_columns: list
    verdicts: dict

    def to_dict(self) -> dict:
        return asdict(self)


def assumption_report(Psi_star, M_star, X=None) -> AssumptionReport:
    """Evaluate every condition the recovery guarantee relies on.

    Verdicts follow the stated ranges: ``0 < gamma < 1``, ``0 < C_min <= 1``,
    ``D_max >= 1``, ``0 < Psi_min <= 1`` (min variant).
    """
    stats = support_sets(Psi_star)
    gamma = check_mutual_incoherence(M_star, stats)
    c_min = check_min_eigenvalue(M_star, stats)
    d_max = check_inf_norm(M_star, stats)
    g_max, g_min, empty = check_min_gap(Psi_star, stats)
    mu_x = mutual_coherence(X) if X is not None else None
    mu_lim = coherence_limit(M_star)
    mu = mu_x if mu_x is not None else mu_lim
    ident = identifiability_check(stats, mu)
    verdicts = {
        "A1_mutual_incoherence": bool(0 < gamma < 1),
        "A2_bounded_eigenvalue": bool(0 < c_min <= 1),
        "A3_bounded_inf_norm": bool(d_max >= 1),
        "A4_nonzero_gap": bool(0 < g_min <= 1),
    }
    return AssumptionReport(
        gamma, c_min, d_max, g_max, g_min, stats.k, mu_x, mu_lim,
        [bool(b) for b in ident], empty, verdicts,
    )
