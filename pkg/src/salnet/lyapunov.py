"""Maximum Lyapunov exponent by twin trajectories, and log-sensitivity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .networks import NetworkState, Topology
from .numerics import Rng, random_unit_vector
from .sal import row_norms

LOG_FLOOR = -50.0


@dataclass
class TrajectoryProbe:
    """Bookkeeping of one twin-trajectory run.

    ``l`` holds the per-step log expansion ratios; the estimate averages
    the entries after the warm-up.  ``underflows`` counts steps where the
    two trajectories coincided exactly and the floor value was recorded.
    """

    d0: float = 1e-3
    warmup: int = 100
    window: int = 1000
    l: list[float] = field(default_factory=list)
    underflows: int = 0

    @property
    def lam(self) -> float:
        tail = self.l[self.warmup:self.warmup + self.window]
        return float(np.mean(tail)) if tail else float("nan")


def _twin_step(net: NetworkState, U: list[np.ndarray]) -> list[np.ndarray]:
    """Advance both trajectories; ``U[i]`` is layer i's internal state, one column per twin."""
    act = (lambda a: a) if net.activation == "identity" else np.tanh
    if net.topology is Topology.FLAT:
        return [net.params["W"] @ act(U[0])]
    if net.topology is Topology.TWO_LAYER:
        O1, O2 = act(U[0]), act(U[1])
        U2 = net.params["W2"] @ O1
        U1 = net.params["W1"] @ (O2 if net.synchronous else act(U2))
        return [U1, U2]
    raise ValueError(f"Lyapunov probe needs a flat or two-layer RNN, got {net.topology.value}")


def probe_lambda(net: NetworkState, rng: Rng, d0: float = 1e-3, warmup: int = 100, window: int = 1000) -> TrajectoryProbe:
    """Run the twin-trajectory estimate on a frozen copy of ``net``.

    The separation is measured on layer 1's internal state and, after each
    step, the whole separation is rescaled so that layer 1's part has norm
    ``d0`` again.  ``net`` itself is never modified.
    """
    probe = TrajectoryProbe(d0=d0, warmup=warmup, window=window)
    U = [np.stack([u, u], axis=1).astype(np.float64) for u in net.u]
    U[0][:, 1] += random_unit_vector(rng, U[0].shape[0], d0)
    for _ in range(warmup + window):
        U = _twin_step(net, U)
        diff = [x[:, 1] - x[:, 0] for x in U]
        dist = float(np.linalg.norm(diff[0]))
        if dist == 0.0 or not np.isfinite(dist):
            probe.l.append(LOG_FLOOR)
            probe.underflows += 1
            for x in U:
                x[:, 1] = x[:, 0]
            U[0][:, 1] += random_unit_vector(rng, U[0].shape[0], d0)
            continue
        probe.l.append(float(np.log(dist / d0)))
        scale = d0 / dist
        for x, dx in zip(U, diff):
            x[:, 1] = x[:, 0] + scale * dx
    return probe


def estimate_lambda(net: NetworkState, rng: Rng, d0: float = 1e-3, warmup: int = 100, window: int = 1000) -> float:
    return probe_lambda(net, rng, d0, warmup, window).lam


def _sensitivity_groups(net: NetworkState):
    p = net.params
    if net.topology is Topology.FLAT:
        return [(net.u[0], p["W"])]
    if net.topology is Topology.TWO_LAYER:
        return [(net.u[0], p["W1"]), (net.u[1], p["W2"])]
    if net.topology is Topology.ELMAN:
        return [(net.u[0], p["W_fb"])]
    if net.topology is Topology.DFNN:
        return [(net.u[k], layer.W) for k, layer in enumerate(net.layers[:-1])]
    raise ValueError(net.topology)


def sensitivities(net: NetworkState) -> list[np.ndarray]:
    """Per-neuron ``f'(U)||w||`` for every sensitivity-bearing layer at the current state."""
    out = []
    for U, W in _sensitivity_groups(net):
        o = np.tanh(U) if net.activation != "identity" else np.zeros_like(U)
        out.append((1.0 - o * o) * row_norms(W))
    return out


def _log_rms(s: np.ndarray) -> float:
    rms = float(np.sqrt(np.mean(np.square(s))))
    return float(np.log(rms)) if rms > 0 else LOG_FLOOR


def log_sensitivity(net: NetworkState) -> tuple[list[float], float]:
    """``ln RMS(s)`` per layer and their sum."""
    per_layer = [_log_rms(s) for s in sensitivities(net)]
    return per_layer, float(sum(per_layer))
