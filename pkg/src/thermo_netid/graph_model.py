"""Lumped thermal network: topology, Laplacian assembly, vector field, and
energy/dissipation diagnostics.

The network is an undirected simple graph. Each node carries one temperature
state and an effective inverse capacitance gamma_i (K/J); each edge carries an
effective conductance delta_ij (W/K), one value per undirected edge so the
coupling is symmetric by construction. Boundary nodes may additionally radiate
to a 0 K sink through a fixed, never-trained coefficient kappa_rad = sigma *
eps * A * z_len (W/K^4).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DivergenceError, GraphError
from .parameterization import DEFAULT_DELTA_SCALE, DEFAULT_GAMMA_SCALE

STEFAN_BOLTZMANN = 5.670374419e-8  # W m^-2 K^-4

NODE_KINDS = ("boundary", "internal")


@dataclass(frozen=True)
class NodeSpec:
    """One thermal node.

    kappa_rad is the known deep-space sink coefficient (W/K^4); it must be zero
    for internal nodes. gamma_scale (K/J) is the maximum admissible value of
    the node's inverse capacitance.
    """

    id: int
    kind: str
    kappa_rad: float = 0.0
    gamma_scale: float = DEFAULT_GAMMA_SCALE

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphError(f"node {self.id}: unknown kind {self.kind!r}")
        if self.kind == "internal" and self.kappa_rad != 0.0:
            raise GraphError(f"node {self.id}: internal nodes cannot radiate (kappa_rad must be 0)")
        if self.kappa_rad < 0.0:
            raise GraphError(f"node {self.id}: kappa_rad must be >= 0")
        if not self.gamma_scale > 0.0:
            raise GraphError(f"node {self.id}: gamma_scale must be > 0")


@dataclass(frozen=True)
class EdgeSpec:
    """Undirected conductive coupling between nodes i and j."""

    i: int
    j: int
    delta_scale: float = DEFAULT_DELTA_SCALE

    def __post_init__(self):
        if self.i == self.j:
            raise GraphError(f"edge ({self.i},{self.j}): self-loops are not allowed")
        if not self.delta_scale > 0.0:
            raise GraphError(f"edge ({self.i},{self.j}): delta_scale must be > 0")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass(frozen=True)
class ThermalGraph:
    """Immutable node/edge topology plus cached index arrays."""

    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        n = len(self.nodes)
        ids = [node.id for node in self.nodes]
        if sorted(ids) != list(range(n)):
            raise GraphError(f"node ids must be 0..{n - 1} without gaps, got {sorted(ids)}")
        if ids != list(range(n)):
            raise GraphError("nodes must be listed in id order")
        seen = set()
        for e in self.edges:
            if not (0 <= e.i < n and 0 <= e.j < n):
                raise GraphError(f"edge ({e.i},{e.j}): endpoint outside node range 0..{n - 1}")
            if e.pair in seen:
                raise GraphError(f"edge ({e.i},{e.j}): duplicate edge for this node pair")
            seen.add(e.pair)
        if n > 0 and not self._connected():
            warnings.warn("thermal graph is disconnected", stacklevel=2)

    def _connected(self) -> bool:
        n = len(self.nodes)
        if n <= 1:
            return True
        adj: list[list[int]] = [[] for _ in range(n)]
        for e in self.edges:
            adj[e.i].append(e.j)
            adj[e.j].append(e.i)
        seen = {0}
        stack = [0]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == n

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_i(self) -> np.ndarray:
        return np.array([e.i for e in self.edges], dtype=np.int64)

    @cached_property
    def edge_j(self) -> np.ndarray:
        return np.array([e.j for e in self.edges], dtype=np.int64)

    @cached_property
    def kappa_rad(self) -> np.ndarray:
        return np.array([node.kappa_rad for node in self.nodes], dtype=float)

    @cached_property
    def gamma_scales(self) -> np.ndarray:
        return np.array([node.gamma_scale for node in self.nodes], dtype=float)

    @cached_property
    def delta_scales(self) -> np.ndarray:
        return np.array([e.delta_scale for e in self.edges], dtype=float)

    @cached_property
    def has_radiation(self) -> bool:
        return bool(np.any(self.kappa_rad > 0.0))

    @cached_property
    def scatter_plan(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # reduceat plan for the edgewise Laplacian action: column order,
        # segment starts, and the node owning each segment
        targets = np.concatenate([self.edge_i, self.edge_j])
        order = np.argsort(targets, kind="stable")
        sorted_t = targets[order]
        starts = np.flatnonzero(np.r_[True, sorted_t[1:] != sorted_t[:-1]])
        return order, starts, sorted_t[starts]


@dataclass(frozen=True)
class PhysicalParameters:
    """Effective inverse capacitances gamma (K/J) and conductances delta (W/K)."""

    gamma: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        delta = np.asarray(self.delta, dtype=float)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "delta", delta)
        if gamma.ndim != 1 or delta.ndim != 1:
            raise GraphError("gamma and delta must be 1-D vectors")
        if np.any(gamma <= 0.0) or not np.all(np.isfinite(gamma)):
            raise GraphError("gamma entries must be finite and > 0")
        if np.any(delta <= 0.0) or not np.all(np.isfinite(delta)):
            raise GraphError("delta entries must be finite and > 0")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.delta])


def _check_delta(graph: ThermalGraph, delta) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (graph.n_edges,):
        raise GraphError(
            f"conductance vector has shape {delta.shape}, expected ({graph.n_edges},) "
            f"for {graph.n_edges} edges"
        )
    for e_idx in np.flatnonzero(~(delta > 0.0)):
        e = graph.edges[int(e_idx)]
        raise GraphError(f"edge ({e.i},{e.j}): conductance must be > 0, got {delta[e_idx]}")
    return delta


def assemble_laplacian(graph: ThermalGraph, delta) -> np.ndarray:
    """Dense weighted graph Laplacian L = D - W.

    Off-diagonals are -delta_e; each diagonal entry is the negated sum of its
    row's off-diagonals, so the row-sum identity L @ 1 = 0 holds exactly in
    floating point when checked the same way. Dense output is intended for
    diagnostics at small n; the integration path never assembles L.
    """
    delta = _check_delta(graph, delta)
    n = graph.n_nodes
    L = np.zeros((n, n))
    for e_idx, e in enumerate(graph.edges):
        L[e.i, e.j] -= delta[e_idx]
        L[e.j, e.i] -= delta[e_idx]
    diag = -L.sum(axis=1)
    np.fill_diagonal(L, diag)
    return L


def laplacian_apply(graph: ThermalGraph, delta, T) -> np.ndarray:
    """Edgewise evaluation of L(delta) @ T for T of shape (..., n).

    Cost O(|E| + |V|) per state row; uniform T maps to exactly zero.
    """
    delta = np.asarray(delta, dtype=float)
    T = np.asarray(T, dtype=float)
    out = np.zeros_like(T)
    if graph.n_edges == 0:
        return out
    ei, ej = graph.edge_i, graph.edge_j
    flux = delta * (T[..., ei] - T[..., ej])
    order, starts, present = graph.scatter_plan
    signed = np.concatenate([flux, -flux], axis=-1)
    out[..., present] = np.add.reduceat(signed[..., order], starts, axis=-1)
    return out


def vector_field(graph: ThermalGraph, params: PhysicalParameters, T, u,
                 radiative_on: bool = True) -> np.ndarray:
    """Time derivative of the nodal temperatures, shape (..., n).

    dT_i/dt = gamma_i * (u_i - [L(delta) T]_i - kappa_i * T_i^4 * radiative_on).
    Pure function of its inputs.
    """
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    n = graph.n_nodes
    if T.shape[-1] != n or u.shape[-1] != n:
        raise GraphError(f"state/input must have {n} entries per row, got {T.shape} / {u.shape}")
    if not np.all(np.isfinite(T)):
        bad = int(np.argmax(~np.isfinite(T)) % n)
        raise DivergenceError(f"non-finite temperature at node {bad}", node_index=bad)
    core = u - laplacian_apply(graph, params.delta, T)
    if radiative_on and graph.has_radiation:
        T2 = T * T
        core = core - graph.kappa_rad * (T2 * T2)
    return params.gamma * core


def effective_emissivity(eps_i: float, eps_j: float, A_i: float, A_j: float,
                         F_ij: float) -> float:
    """Effective emissivity of a two-surface radiative exchange.

    Defined by 1/(eps* A_i F_ij) = (1-eps_i)/(eps_i A_i) + 1/(A_i F_ij)
    + (1-eps_j)/(eps_j A_j). Black surfaces with full view give eps* = 1.
    """
    for name, val in (("eps_i", eps_i), ("eps_j", eps_j), ("A_i", A_i),
                      ("A_j", A_j), ("F_ij", F_ij)):
        if not val > 0.0:
            raise GraphError(f"{name} must be > 0, got {val}")
    if eps_i > 1.0 or eps_j > 1.0:
        raise GraphError("emissivities must lie in (0, 1]")
    resistance = (1.0 - eps_i) / (eps_i * A_i) + 1.0 / (A_i * F_ij) + (1.0 - eps_j) / (eps_j * A_j)
    return 1.0 / (A_i * F_ij * resistance)


def radiative_equivalent_conductance(T_bar: float, eps_star: float, A_i: float,
                                     F_ij: float) -> float:
    """Conductance (W/K) of a radiative exchange linearized at T_bar."""
    if T_bar < 0.0:
        raise GraphError(f"reference temperature must be >= 0, got {T_bar}")
    return 4.0 * STEFAN_BOLTZMANN * T_bar**3 * eps_star * A_i * F_ij


def thermal_content(params: PhysicalParameters, T) -> float:
    """Total heat content sum_i T_i / gamma_i (effective C_i = 1/gamma_i)."""
    T = np.asarray(T, dtype=float)
    if T.shape[-1] != params.gamma.shape[0]:
        raise GraphError(f"state has {T.shape[-1]} entries, expected {params.gamma.shape[0]}")
    return np.sum(T / params.gamma, axis=-1)


def dissipation_rate(graph: ThermalGraph, delta, T) -> float:
    """Conductive dissipation sum_edges delta_e (T_i - T_j)^2 = T' L T >= 0."""
    delta = _check_delta(graph, delta)
    T = np.asarray(T, dtype=float)
    if graph.n_edges == 0:
        return np.zeros(T.shape[:-1])[()] if T.ndim > 1 else 0.0
    diff = T[..., graph.edge_i] - T[..., graph.edge_j]
    return np.sum(delta * diff * diff, axis=-1)


def graph_from_config(cfg: dict) -> ThermalGraph:
    """Build a ThermalGraph from its JSON-style dict form.

    Schema: {"nodes": [{"id", "kind", "kappa_rad", "gamma_scale"}...],
             "edges": [{"i", "j", "delta_scale"}...]}; kappa_rad, gamma_scale
    and delta_scale may be omitted (0.0 and the default scales apply).
    """
    try:
        nodes_cfg = cfg["nodes"]
        edges_cfg = cfg["edges"]
    except KeyError as exc:
        raise GraphError(f"graph config missing section {exc}") from None
    nodes = tuple(
        NodeSpec(
            id=int(nc["id"]),
            kind=str(nc["kind"]),
            kappa_rad=float(nc.get("kappa_rad", 0.0)),
            gamma_scale=float(nc.get("gamma_scale", DEFAULT_GAMMA_SCALE)),
        )
        for nc in sorted(nodes_cfg, key=lambda nc: int(nc["id"]))
    )
    edges = tuple(
        EdgeSpec(
            i=int(ec["i"]),
            j=int(ec["j"]),
            delta_scale=float(ec.get("delta_scale", DEFAULT_DELTA_SCALE)),
        )
        for ec in edges_cfg
    )
    return ThermalGraph(nodes=nodes, edges=edges)


def graph_to_config(graph: ThermalGraph) -> dict:
    """Inverse of graph_from_config."""
    return {
        "nodes": [
            {"id": nd.id, "kind": nd.kind, "kappa_rad": nd.kappa_rad,
             "gamma_scale": nd.gamma_scale}
            for nd in graph.nodes
        ],
        "edges": [
            {"i": e.i, "j": e.j, "delta_scale": e.delta_scale} for e in graph.edges
        ],
    }
