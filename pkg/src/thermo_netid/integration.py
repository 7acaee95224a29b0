"""Fixed-step forward integration of the thermal network ODE.

The stepper is classical explicit RK4 with the step size equal to the
telemetry sampling interval and zero-order hold on the inputs. An optional
smooth limiter is applied to the state after each full step (never inside the
RK stages): it is the identity on [v, 2v], compresses everything outside into
(0, 3v) through tanh branches, and is C^1 at the knots. The limiter is a
training-time stabilizer only; evaluation rollouts run with it disabled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from . import _kernels
from .errors import ConfigError, DivergenceError, GraphError
from .graph_model import PhysicalParameters, ThermalGraph

if TYPE_CHECKING:
    from .training import WindowBatch

INPUT_HOLDS = ("zero_order",)


@dataclass(frozen=True)
class RolloutConfig:
    """Stepper settings. dt in seconds, limiter_v in Kelvin."""

    dt: float
    limiter_enabled: bool = True
    limiter_v: float = 200.0
    input_hold: str = "zero_order"

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigError("dt must be > 0")
        if not self.limiter_v > 0.0:
            raise ConfigError("limiter_v must be > 0")
        if self.input_hold not in INPUT_HOLDS:
            raise ConfigError(f"unknown input_hold {self.input_hold!r}")

    def evaluation_mode(self) -> "RolloutConfig":
        """Copy with the limiter disabled (used for validation/test rollouts)."""
        return replace(self, limiter_enabled=False)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled temperature trajectory: times (K,), states (K, n)."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ConfigError(f"inconsistent trajectory shapes {times.shape} / {states.shape}")
        if times.shape[0] > 1:
            dts = np.diff(times)
            if np.any(dts <= 0.0) or not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
                raise ConfigError("trajectory times must increase with uniform spacing")


def limiter(T, v: float = 200.0):
    """Smooth temperature limiter; identity on [v, 2v], range (0, 3v)."""
    T = np.asarray(T, dtype=float)
    low = v * np.tanh(T / v - 1.0) + v
    high = v * np.tanh(T / v - 2.0) + 2.0 * v
    return np.where(T < v, low, np.where(T > 2.0 * v, high, T))


def limiter_derivative(T, v: float = 200.0):
    """Derivative of the limiter: 1 inside [v, 2v], sech^2 on the branches."""
    T = np.asarray(T, dtype=float)
    tl = np.tanh(T / v - 1.0)
    th = np.tanh(T / v - 2.0)
    return np.where(T < v, 1.0 - tl * tl, np.where(T > 2.0 * v, 1.0 - th * th, 1.0))


def _as_state(graph: ThermalGraph, arr, name: str) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    if out.shape[-1] != graph.n_nodes:
        raise GraphError(f"{name} has {out.shape[-1]} entries per row, expected {graph.n_nodes}")
    return out


def step(graph: ThermalGraph, params: PhysicalParameters, T_k, u_k,
         config: RolloutConfig, step_index: int | None = None) -> np.ndarray:
    """One RK4 step from T_k with the input held at u_k over the step."""
    T_k = _as_state(graph, T_k, "state")
    u_k = _as_state(graph, u_k, "input")
    if not np.all(np.isfinite(T_k)):
        bad = int(np.argmax(~np.isfinite(T_k)))
        raise DivergenceError(f"non-finite temperature at node {bad}", node_index=bad,
                              step_index=step_index)
    inputs = np.zeros((2, 1, graph.n_nodes))
    inputs[0, 0] = u_k
    status, bad_step, bad_node, states = _kernels.forward_window(
        graph.edge_i, graph.edge_j, params.gamma, graph.kappa_rad, params.delta,
        T_k.reshape(1, -1), inputs, config.dt, graph.has_radiation,
        config.limiter_enabled, config.limiter_v)
    if status != _kernels.STATUS_OK:
        raise DivergenceError(
            f"integration diverged at step {step_index if step_index is not None else bad_step}"
            f" (node {bad_node})", step_index=step_index, node_index=bad_node)
    return states[1, 0]


def rollout(graph: ThermalGraph, params: PhysicalParameters, T0, inputs,
            config: RolloutConfig, t0: float = 0.0) -> Trajectory:
    """Integrate K-1 steps from T0; inputs has K rows (the last row is unused).

    states[0] = T0 and states[k+1] = step(states[k], inputs[k]). Deterministic:
    identical arguments produce bit-identical trajectories.
    """
    T0 = _as_state(graph, T0, "initial state")
    inputs = _as_state(graph, np.atleast_2d(inputs), "inputs")
    K = inputs.shape[0]
    states = _rollout_states(graph, params, T0.reshape(1, -1),
                             inputs.reshape(K, 1, -1), config)
    times = t0 + config.dt * np.arange(K)
    return Trajectory(times=times, states=states[:, 0, :])


def _rollout_states(graph: ThermalGraph, params: PhysicalParameters,
                    T0_rows: np.ndarray, inputs_kbn: np.ndarray,
                    config: RolloutConfig) -> np.ndarray:
    """Shared kernel entry: T0_rows (B, n), inputs (K, B, n) -> states (K, B, n)."""
    status, bad_step, bad_node, states = _kernels.forward_window(
        graph.edge_i, graph.edge_j,
        np.ascontiguousarray(params.gamma), graph.kappa_rad,
        np.ascontiguousarray(params.delta),
        np.ascontiguousarray(T0_rows), np.ascontiguousarray(inputs_kbn),
        config.dt, graph.has_radiation, config.limiter_enabled, config.limiter_v)
    if status != _kernels.STATUS_OK:
        raise DivergenceError(f"integration diverged at step {bad_step} (node {bad_node})",
                              step_index=int(bad_step), node_index=int(bad_node))
    return states


def batched_rollout(graph: ThermalGraph, params: PhysicalParameters,
                    batch: "WindowBatch", config: RolloutConfig) -> list[Trajectory]:
    """Advance all windows of a batch together as one (B, n) state block.

    Equivalent to (and bit-identical with) rolling each window out on its own;
    per-step cost is O(B * (|E| + |V|)).
    """
    if batch.n_windows == 0:
        return []
    states = _rollout_states(graph, params, batch.stacked_initial,
                             batch.stacked_inputs, config)
    out = []
    for w_idx, window in enumerate(batch.windows):
        times = config.dt * (window.start + np.arange(batch.length))
        out.append(Trajectory(times=times, states=states[:, w_idx, :]))
    return out
