"""Core value types: the closed-loop system and the noise laws driving it."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import optimize, special


class UnstableSystemError(ValueError):
    """Raised when a closed loop is not strictly stable."""


def spectral_radius(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def make_rng(seed=None) -> np.random.Generator:
    """Counter-based generator (Philox) so every trajectory owns an independent stream.

    ``seed`` may be an int, a sequence of ints, a SeedSequence or an existing Generator
    (returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Plant ``x(t+1) = A x + B u + w`` under the static input law ``u = K0 x + v``."""

    A: np.ndarray
    B: np.ndarray
    K0: np.ndarray | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        B = np.array(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(n, -1)
        if B.ndim != 2 or B.shape[0] != n:
            raise ValueError(f"B must be {n} x m, got shape {B.shape}")
        m = B.shape[1]
        if m < 1:
            raise ValueError("input dimension m must be positive")
        K0 = np.zeros((m, n)) if self.K0 is None else np.array(self.K0, dtype=float, ndmin=2)
        if K0.shape != (m, n):
            raise ValueError(f"K0 must be {m} x {n}, got shape {K0.shape}")
        for arr in (A, B, K0):
            if not np.all(np.isfinite(arr)):
                raise ValueError("system matrices must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "K0", K0)
        rho = spectral_radius(A + B @ K0)
        if not rho < 1.0:
            raise UnstableSystemError(
                f"closed loop A + B K0 has spectral radius {rho:.6g} >= 1"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def A_cl(self) -> np.ndarray:
        out = self.A + self.B @ self.K0
        out.setflags(write=False)
        return out

    @property
    def Psi_star(self) -> np.ndarray:
        """Stacked true parameter ``[A B]^T`` of shape (n+m) x n."""
        return np.hstack([self.A, self.B]).T.copy()

    @property
    def closed_loop_radius(self) -> float:
        return spectral_radius(self.A_cl)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "A": self.A.ravel().tolist(),
            "B": self.B.ravel().tolist(),
            "K0": self.K0.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemModel":
        n, m = int(d["n"]), int(d["m"])
        A = np.asarray(d["A"], dtype=float).reshape(n, n)
        B = np.asarray(d["B"], dtype=float).reshape(n, m)
        K0 = d.get("K0")
        K0 = None if K0 is None else np.asarray(K0, dtype=float).reshape(m, n)
        return cls(A, B, K0)

    def save(self, path, **extra) -> None:
        payload = self.to_dict()
        payload.update(extra)
        Path(path).write_text(json.dumps(payload, indent=2))

    @classmethod
    def load(cls, path) -> "SystemModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


NOISE_FAMILIES = ("gaussian", "uniform", "rademacher")
_FAMILY_ALIASES = {"uniform-bounded": "uniform", "normal": "gaussian"}


def _uniform_psi_ratio() -> float:
    # r/a solving E exp(x^2/r^2) = 2 for x ~ U[-a, a]; E = sqrt(pi) erfi(c) / (2c), c = a/r
    f = lambda c: math.sqrt(math.pi) * special.erfi(c) / (2.0 * c) - 2.0
    c = optimize.brentq(f, 1e-6, 5.0, xtol=1e-15)
    return 1.0 / c


@dataclass(frozen=True)
class NoiseSpec:
    """Centered i.i.d. noise law.

    ``scale`` is the standard deviation for ``gaussian``, the half-width ``a`` of
    ``[-a, a]`` for ``uniform`` and the magnitude of ``+-a`` for ``rademacher``.
    """

    family: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        fam = _FAMILY_ALIASES.get(self.family, self.family)
        if fam not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; expected one of {NOISE_FAMILIES}")
        scale = float(self.scale)
        if not (math.isfinite(scale) and scale >= 0.0):
            raise ValueError(f"noise scale must be finite and >= 0, got {self.scale}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def gaussian_var(cls, variance: float) -> "NoiseSpec":
        return cls("gaussian", math.sqrt(variance))

    @property
    def variance(self) -> float:
        a = self.scale
        if self.family == "uniform":
            return a * a / 3.0
        return a * a

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def subgaussian_parameter(self) -> float:
        # gaussian: b = sigma; bounded laws on [-a, a] (Hoeffding): b = a
        return self.scale

    @property
    def psi_norm(self) -> float:
        """Orlicz norm: smallest r with E exp(x^2 / r^2) <= 2."""
        a = self.scale
        if self.family == "gaussian":
            return math.sqrt(8.0 / 3.0) * a
        if self.family == "rademacher":
            return a / math.sqrt(math.log(2.0))
        return _UNIFORM_PSI_RATIO * a

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        a = self.scale
        if self.family == "gaussian":
            return a * rng.standard_normal(size)
        if self.family == "uniform":
            return rng.uniform(-a, a, size)
        return a * (2.0 * rng.integers(0, 2, size) - 1.0)

    def to_dict(self) -> dict:
        return {"family": self.family, "scale": self.scale}


_UNIFORM_PSI_RATIO = _uniform_psi_ratio()


def noise_eta(w_spec: NoiseSpec, v_spec: NoiseSpec) -> float:
    """Common sub-Gaussian norm bound max(||w||_psi, ||v||_psi)."""
    return max(w_spec.psi_norm, v_spec.psi_norm)
