"""Bounded parameter embedding.

Optimization runs over unconstrained raw variables; the tanh map below sends
each raw coordinate into the open interval (0, s) where s is the per-parameter
admissible scale. Positivity and boundedness of the physical parameters are
therefore structural and never need clamping. The raw vector layout is
[gamma_0..gamma_{n-1}, delta_0..delta_{m-1}] with deltas in edge-list order.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError

if TYPE_CHECKING:
    from .graph_model import PhysicalParameters, ThermalGraph

# Fallback admissible scales when a graph config omits them. Real configs
# should carry scales from expected orders of magnitude of the application.
DEFAULT_GAMMA_SCALE = 1e-2  # K/J
DEFAULT_DELTA_SCALE = 1e2   # W/K

INIT_STRATEGIES = ("midpoint", "uniform_jitter")


def embed(raw, scales):
    """Map unconstrained raw values into (0, scales) elementwise.

    p = (s/2) * (tanh(2*raw) + 1). Strictly increasing in each coordinate,
    total (never raises), midpoint s/2 at raw = 0.
    """
    raw = np.asarray(raw, dtype=float)
    scales = np.asarray(scales, dtype=float)
    return 0.5 * scales * (np.tanh(2.0 * raw) + 1.0)


def inverse_embed(p, scales):
    """Raw values that embed to ``p``. Requires 0 < p < scales strictly."""
    p = np.asarray(p, dtype=float)
    scales = np.asarray(scales, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= scales):
        bad = int(np.argmax((p <= 0.0) | (p >= scales)))
        raise ConfigError(
            f"physical value p[{bad}]={p.flat[bad] if p.ndim else float(p)} "
            f"outside the open interval (0, {scales.flat[bad] if scales.ndim else float(scales)})"
        )
    return 0.5 * np.arctanh(2.0 * p / scales - 1.0)


def embed_jacobian(raw, scales):
    """Diagonal of d(embed)/d(raw): s * (1 - tanh^2(2*raw)), in (0, s]."""
    raw = np.asarray(raw, dtype=float)
    scales = np.asarray(scales, dtype=float)
    t = np.tanh(2.0 * raw)
    return scales * (1.0 - t * t)


def scales_for_graph(graph: "ThermalGraph") -> np.ndarray:
    """Concatenated per-parameter scales [gamma scales, delta scales]."""
    return np.concatenate([graph.gamma_scales, graph.delta_scales])


def init_raw(seed: int, graph: "ThermalGraph", strategy: str = "midpoint") -> np.ndarray:
    """Initial raw vector for an optimization run.

    midpoint: all zeros (every parameter starts at s/2, the point of maximal
    embedding Jacobian). uniform_jitter: i.i.d. uniform in [-0.5, 0.5],
    reproducible per seed.
    """
    if strategy not in INIT_STRATEGIES:
        raise ConfigError(f"unknown init strategy {strategy!r}; expected one of {INIT_STRATEGIES}")
    size = graph.n_nodes + graph.n_edges
    if strategy == "midpoint":
        return np.zeros(size)
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(-0.5, 0.5, size=size)


def to_physical(graph: "ThermalGraph", raw: np.ndarray) -> "PhysicalParameters":
    """Embed a raw vector and split it into PhysicalParameters for ``graph``."""
    from .graph_model import PhysicalParameters

    raw = np.asarray(raw, dtype=float)
    n = graph.n_nodes
    expected = n + graph.n_edges
    if raw.shape != (expected,):
        raise ConfigError(f"raw vector has shape {raw.shape}, expected ({expected},)")
    full = embed(raw, scales_for_graph(graph))
    return PhysicalParameters(gamma=full[:n], delta=full[n:])


def parameter_names(graph: "ThermalGraph") -> list[str]:
    """Stable human-readable ids, aligned with the raw vector layout."""
    names = [f"gamma[{node.id}]" for node in graph.nodes]
    names += [f"delta[{e.i}-{e.j}]" for e in graph.edges]
    return names
