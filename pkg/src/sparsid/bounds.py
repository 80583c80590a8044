"""Regularization rules and error/sample-size bounds for the column-wise Lasso."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .diagnostics import assumption_report
from .models import noise_eta
from .stationary import stationary_stats


@dataclass(frozen=True)
class TheoryParams:
    C: float
    rho: float
    eta: float
    gamma: float
    C_min: float
    D_max: float
    Psi_min: float
    k: int
    n: int
    m: int
    delta: float = 0.05
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0

    def __post_init__(self):
        for name in ("C", "rho", "eta", "gamma", "C_min", "D_max", "Psi_min", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive (incoherence holds), got {self.gamma}")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.eta <= 0 or self.C_min <= 0 or self.Psi_min <= 0:
            raise ValueError("eta, C_min and Psi_min must be positive")
        out_of_range = [
            name
            for name, ok in (
                ("gamma < 1", self.gamma < 1),
                ("C_min <= 1", self.C_min <= 1),
                ("D_max >= 1", self.D_max >= 1),
                ("Psi_min <= 1", self.Psi_min <= 1),
                ("C >= 1", self.C >= 1),
            )
            if not ok
        ]
        if out_of_range:
            warnings.warn(
                "parameters outside the guarantee's stated ranges: " + ", ".join(out_of_range),
                stacklevel=2,
            )

    @property
    def dependence(self) -> float:
        """``C / (1 - rho)``: strength of temporal dependence."""
        return self.C / (1.0 - self.rho)

    @property
    def log_term(self) -> float:
        return math.log((self.n + self.m) / self.delta)

    def to_dict(self) -> dict:
        return asdict(self)


def theorem1_lambda(p: TheoryParams, T: int) -> float:
    return p.c1 * p.dependence * (p.eta**2 / p.gamma) * math.sqrt(p.log_term / T)


def theorem1_min_T_raw(p: TheoryParams) -> float:
    return (
        p.c2
        * p.dependence**4
        * p.D_max**2
        / (p.gamma**2 * p.C_min**2 * p.Psi_min**2)
        * p.k**2
        * p.log_term
    )


def theorem1_min_T(p: TheoryParams) -> int:
    return math.ceil(theorem1_min_T_raw(p))


def theorem1_error_bound(p: TheoryParams, T: int) -> float:
    return p.c3 * p.dependence * (p.D_max * p.eta**2 / p.gamma) * math.sqrt(p.log_term / T)


def paper_lambda(n: int, m: int, T: int) -> float:
    """Empirical rule ``sqrt(0.03 log(n+m) / T)`` (natural log)."""
    return math.sqrt(0.03 * math.log(n + m) / T)


class DeterministicBound(NamedTuple):
    bound: float
    deviation: float  # ||M_AA - M*_AA||_inf
    precondition_met: bool


def deterministic_error_bound(M, M_star, G_col, support, D_max: float, lam: float, eta: float = math.inf):
    """Bound on the on-support l-infinity error of a column that recovered its support.

    ``(2 D_max^2 ||dM_AA||_inf + D_max) (||G_A||_inf + lam)``, valid when
    ``||dM_AA||_inf <= min(1, 2 eta^2) / (2 D_max)``. A violated precondition is
    reported, not raised.
    """
    A = np.asarray(support, dtype=int)
    if A.size == 0:
        raise ValueError("support must be nonempty")
    dM = np.asarray(M, dtype=float)[np.ix_(A, A)] - np.asarray(M_star, dtype=float)[np.ix_(A, A)]
    dev = float(np.abs(dM).sum(axis=1).max())
    g = float(np.abs(np.asarray(G_col, dtype=float)[A]).max())
    bound = (2.0 * D_max**2 * dev + D_max) * (g + lam)
    ok = dev <= min(1.0, 2.0 * eta**2) / (2.0 * D_max)
    return DeterministicBound(bound, dev, bool(ok))


def theory_params(sys, w_spec, v_spec, delta: float = 0.05, *, stats=None, report=None, **constants) -> TheoryParams:
    """Assemble every constant the guarantee needs for a concrete system and noise law.

    Uses the min-over-nonzeros gap for ``Psi_min``.
    """
    stats = stats or stationary_stats(sys, w_spec, v_spec)
    report = report or assumption_report(sys.Psi_star, stats.M_star)
    return TheoryParams(
        C=stats.C,
        rho=stats.rho,
        eta=noise_eta(w_spec, v_spec),
        gamma=report.gamma,
        C_min=report.C_min,
        D_max=report.D_max,
        Psi_min=report.Psi_min_min_variant,
        k=report.k,
        n=sys.n,
        m=sys.m,
        delta=delta,
        **constants,
    )
