"""Trajectory-matching loss and its exact gradient.

The gradient is the discrete adjoint of the implemented stepper: the reverse
sweep differentiates the exact floating-point map computed by the forward
rollout (RK4 stages, post-step limiter, T^4 sink, edgewise Laplacian action)
and finally chains through the bounded-embedding Jacobian to reach the raw
optimization variables. A central finite-difference oracle over the same loss
is provided for verification; it shares the forward rollout but knows nothing
about the reverse sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import _kernels
from .errors import DivergenceError, GraphError
from .graph_model import ThermalGraph
from .integration import RolloutConfig, Trajectory
from .parameterization import embed, embed_jacobian

if TYPE_CHECKING:
    from .training import WindowBatch


@dataclass(frozen=True)
class LossReport:
    """Loss value, gradient with respect to the raw vector, and step count."""

    loss: float
    grad_raw: np.ndarray
    n_steps: int


def _norm_scale(n: int, normalization) -> np.ndarray:
    if normalization is None:
        return np.ones(n)
    scale = np.asarray(normalization, dtype=float)
    if scale.shape != (n,):
        raise GraphError(f"normalization has shape {scale.shape}, expected ({n},)")
    if np.any(scale <= 0.0):
        raise GraphError("normalization scales must be > 0")
    return scale


def _stacked_loss(states: np.ndarray, targets: np.ndarray, scale: np.ndarray):
    """Mean squared normalized residual over (K, B, n), plus its cotangent."""
    resid = (states - targets) / scale
    count = resid.size
    loss = float(np.sum(resid * resid) / count)
    cot = (2.0 / count) * resid / scale
    return loss, cot


def trajectory_loss(predicted: Sequence[Trajectory], targets: "WindowBatch",
                    normalization=None) -> float:
    """Mean over windows, samples, and nodes of the squared normalized residual.

    The k = 0 sample is included; it contributes zero whenever windows start
    from the measured state. ``normalization`` is a per-node scale (defaults
    to 1 K).
    """
    if len(predicted) != targets.n_windows:
        raise GraphError(f"{len(predicted)} trajectories for {targets.n_windows} windows")
    if targets.n_windows == 0:
        return 0.0
    n = targets.stacked_targets.shape[-1]
    scale = _norm_scale_from_n(n, normalization)
    total = 0.0
    count = 0
    for traj, window in zip(predicted, targets.windows):
        if traj.states.shape != window.targets.shape:
            raise GraphError(
                f"trajectory shape {traj.states.shape} does not match targets "
                f"{window.targets.shape}")
        resid = (traj.states - window.targets) / scale
        total += float(np.sum(resid * resid))
        count += resid.size
    return total / count


def _norm_scale_from_n(n: int, normalization) -> np.ndarray:
    if normalization is None:
        return np.ones(n)
    scale = np.asarray(normalization, dtype=float)
    if scale.shape != (n,):
        raise GraphError(f"normalization has shape {scale.shape}, expected ({n},)")
    if np.any(scale <= 0.0):
        raise GraphError("normalization scales must be > 0")
    return scale


def loss_and_gradient(graph: ThermalGraph, raw: np.ndarray, scales: np.ndarray,
                      batch: "WindowBatch", config: RolloutConfig,
                      normalization=None) -> LossReport:
    """Windowed trajectory loss and its exact raw-space gradient.

    The loss equals trajectory_loss over batched_rollout with the same config;
    the gradient is the discrete adjoint of that computation. Raises
    DivergenceError if the forward pass produces non-finite states with the
    limiter disabled (the training loop treats that as a rejected step).
    """
    raw = np.asarray(raw, dtype=float)
    n, m = graph.n_nodes, graph.n_edges
    if raw.shape != (n + m,):
        raise GraphError(f"raw vector has shape {raw.shape}, expected ({n + m},)")
    full = embed(raw, scales)
    gamma = np.ascontiguousarray(full[:n])
    delta = np.ascontiguousarray(full[n:])
    scale = _norm_scale(graph, normalization)

    status, bad_step, bad_node, states, ypre, stage_T, stage_k = _kernels.forward_window_stored(
        graph.edge_i, graph.edge_j, gamma, graph.kappa_rad, delta,
        batch.stacked_initial, batch.stacked_inputs, config.dt,
        graph.has_radiation, config.limiter_enabled, config.limiter_v)
    if status != _kernels.STATUS_OK:
        raise DivergenceError(f"forward pass diverged at step {bad_step} (node {bad_node})",
                              step_index=int(bad_step), node_index=int(bad_node))

    loss, cot = _stacked_loss(states, batch.stacked_targets, scale)
    ggamma, gdelta = _kernels.adjoint_window(
        graph.edge_i, graph.edge_j, gamma, graph.kappa_rad, delta, config.dt,
        graph.has_radiation, config.limiter_enabled, config.limiter_v,
        states, ypre, stage_T, stage_k, np.ascontiguousarray(cot))
    grad_phys = np.concatenate([ggamma, gdelta])
    grad_raw = grad_phys * embed_jacobian(raw, scales)
    n_steps = batch.n_windows * (batch.length - 1)
    return LossReport(loss=loss, grad_raw=grad_raw, n_steps=n_steps)


def evaluate_loss(graph: ThermalGraph, raw: np.ndarray, scales: np.ndarray,
                  batch: "WindowBatch", config: RolloutConfig,
                  normalization=None) -> float:
    """Forward-only loss evaluation (no gradient, no stage storage)."""
    raw = np.asarray(raw, dtype=float)
    n = graph.n_nodes
    full = embed(raw, scales)
    gamma = np.ascontiguousarray(full[:n])
    delta = np.ascontiguousarray(full[n:])
    scale = _norm_scale(graph, normalization)
    status, bad_step, bad_node, states = _kernels.forward_window(
        graph.edge_i, graph.edge_j, gamma, graph.kappa_rad, delta,
        batch.stacked_initial, batch.stacked_inputs, config.dt,
        graph.has_radiation, config.limiter_enabled, config.limiter_v)
    if status != _kernels.STATUS_OK:
        raise DivergenceError(f"forward pass diverged at step {bad_step} (node {bad_node})",
                              step_index=int(bad_step), node_index=int(bad_node))
    loss, _ = _stacked_loss(states, batch.stacked_targets, scale)
    return loss


def finite_difference_gradient(graph: ThermalGraph, raw: np.ndarray, scales: np.ndarray,
                               batch: "WindowBatch", config: RolloutConfig,
                               h: float = 1e-5, normalization=None) -> np.ndarray:
    """Central finite differences of the windowed loss, coordinate by coordinate.

    Costs 2 * (n + |E|) rollouts. Independent oracle for loss_and_gradient.
    """
    if not h > 0.0:
        raise GraphError("finite-difference step h must be > 0")
    raw = np.asarray(raw, dtype=float)
    grad = np.zeros_like(raw)
    for idx in range(raw.size):
        bumped = raw.copy()
        bumped[idx] = raw[idx] + h
        f_plus = evaluate_loss(graph, bumped, scales, batch, config, normalization)
        bumped[idx] = raw[idx] - h
        f_minus = evaluate_loss(graph, bumped, scales, batch, config, normalization)
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad
