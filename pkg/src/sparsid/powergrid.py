"""Random swing-equation networks under the DC approximation, discretized to (A, B)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .models import NoiseSpec, SystemModel, UnstableSystemError, make_rng

log = logging.getLogger(__name__)

DT = 0.1
MAX_DEGREE = 10
SUSCEPTANCE_RANGE = (0.5, 1.0)
INERTIA_RANGE = (1.0, 2.0)
DAMPING_RANGE = (0.5, 1.5)
FEEDBACK_GAIN = -0.1
W_VARIANCE = 0.01
V_VARIANCE = 0.05


@dataclass(frozen=True, eq=False)
class GridTopology:
    N_g: int
    edges: list  # (i, j) pairs with i < j
    degrees: np.ndarray
    sampler: str = "uniform-attachment"

    def neighbors(self) -> list:
        nb = [[] for _ in range(self.N_g)]
        for e, (i, j) in enumerate(self.edges):
            nb[i].append((j, e))
            nb[j].append((i, e))
        return nb


@dataclass(frozen=True, eq=False)
class GridParams:
    susceptance: np.ndarray  # one per edge, aligned with GridTopology.edges
    inertia: np.ndarray
    damping: np.ndarray
    dt: float = DT


@dataclass(frozen=True, eq=False)
class GridInstance:
    system: SystemModel
    topology: GridTopology
    params: GridParams
    resamples: int = 0
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = self.system.to_dict()
        out["metadata"] = {
            **self.metadata,
            "N_g": self.topology.N_g,
            "edges": [list(e) for e in self.topology.edges],
            "tree_sampler": self.topology.sampler,
            "susceptance": self.params.susceptance.tolist(),
            "inertia": self.params.inertia.tolist(),
            "damping": self.params.damping.tolist(),
            "dt": self.params.dt,
            "resamples": self.resamples,
        }
        return out


def random_tree(N_g: int, max_degree: int = MAX_DEGREE, rng=None) -> GridTopology:
    """Degree-capped uniform attachment: node i joins a uniformly chosen earlier node
    that still has spare degree."""
    if N_g < 2:
        raise ValueError("need at least two generators")
    if max_degree < 2:
        raise ValueError("max_degree must be >= 2")
    rng = make_rng(rng)
    deg = np.zeros(N_g, dtype=int)
    edges = []
    for i in range(1, N_g):
        open_nodes = np.flatnonzero(deg[:i] < max_degree)
        j = int(open_nodes[rng.integers(open_nodes.size)])
        edges.append((j, i))
        deg[i] += 1
        deg[j] += 1
    return GridTopology(N_g, edges, deg)


def sample_grid_params(topo: GridTopology, rng=None, dt: float = DT) -> GridParams:
    rng = make_rng(rng)
    b = rng.uniform(*SUSCEPTANCE_RANGE, len(topo.edges))
    M = rng.uniform(*INERTIA_RANGE, topo.N_g)
    D = rng.uniform(*DAMPING_RANGE, topo.N_g)
    return GridParams(b, M, D, dt)


def swing_matrices(topo: GridTopology, params: GridParams) -> tuple[np.ndarray, np.ndarray]:
    """Block matrices with state ``[theta_i, theta_dot_i]`` per generator and one input each."""
    N = topo.N_g
    dt = params.dt
    A = np.zeros((2 * N, 2 * N))
    B = np.zeros((2 * N, N))
    for i, nbrs in enumerate(topo.neighbors()):
        Mi = params.inertia[i]
        total = sum(params.susceptance[e] for _, e in nbrs)
        r = 2 * i
        A[r, r] = 1.0
        A[r, r + 1] = dt
        A[r + 1, r] = -total / Mi * dt
        A[r + 1, r + 1] = 1.0 - params.damping[i] / Mi * dt
        for j, e in nbrs:
            A[r + 1, 2 * j] = params.susceptance[e] / Mi * dt
        B[r + 1, i] = 1.0
    return A, B


def default_feedback(N_g: int) -> np.ndarray:
    """``u_i = -0.1 (theta_i + theta_dot_i)`` as an N_g x 2N_g block-diagonal gain."""
    K0 = np.zeros((N_g, 2 * N_g))
    for i in range(N_g):
        K0[i, 2 * i] = K0[i, 2 * i + 1] = FEEDBACK_GAIN
    return K0


def build_swing_system(topo: GridTopology, params: GridParams, K0=None) -> SystemModel:
    A, B = swing_matrices(topo, params)
    return SystemModel(A, B, default_feedback(topo.N_g) if K0 is None else K0)


def single_generator_system(inertia: float, damping: float, dt: float = DT) -> SystemModel:
    topo = GridTopology(1, [], np.zeros(1, dtype=int))
    return build_swing_system(topo, GridParams(np.zeros(0), np.array([inertia]), np.array([damping]), dt))


def default_noise() -> tuple[NoiseSpec, NoiseSpec]:
    return NoiseSpec.gaussian_var(W_VARIANCE), NoiseSpec.gaussian_var(V_VARIANCE)


def generate_instance(
    N_g: int,
    rng=None,
    *,
    max_degree: int = MAX_DEGREE,
    dt: float = DT,
    tree_sampler=random_tree,
    max_resamples: int = 100,
) -> GridInstance:
    """Sample topology and parameters; resample whole instances that the default
    feedback fails to stabilize."""
    rng = make_rng(rng)
    for attempt in range(max_resamples + 1):
        topo = tree_sampler(N_g, max_degree, rng)
        params = sample_grid_params(topo, rng, dt)
        try:
            system = build_swing_system(topo, params)
        except UnstableSystemError as exc:
            log.warning("N_g=%d instance %d not stabilized by default feedback (%s); resampling",
                        N_g, attempt, exc)
            continue
        meta = {"max_degree": max_degree, "closed_loop_radius": system.closed_loop_radius}
        return GridInstance(system, topo, params, attempt, meta)
    raise UnstableSystemError(f"no stable instance after {max_resamples} resamples")


def expected_nonzeros(topo: GridTopology) -> int:
    """Structural nonzero count of A: four per diagonal block when the generator has
    neighbors (three otherwise) plus one per directed neighbor pair."""
    connected = int(np.count_nonzero(topo.degrees))
    return 4 * connected + 3 * (topo.N_g - connected) + 2 * len(topo.edges)


def max_column_support(topo: GridTopology) -> int:
    """Largest row support of [A B]: a frequency row touches its own angle, frequency,
    input and every neighbor angle."""
    deg = int(topo.degrees.max(initial=0))
    return deg + 3 if deg else 2

