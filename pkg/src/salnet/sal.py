"""Per-neuron sensitivity and sensitivity adjustment learning (SAL).

All neurons use tanh, so ``f'(U) = 1 - o**2``.  The scalar functions work
on one neuron; the ``*_layer`` helpers apply the same rules row-wise to a
weight matrix whose rows are the incoming weight vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .numerics import DegenerateError


class SalVariant(str, Enum):
    FULL = "full-nonlinear"
    LINEAR = "linear-update"


class SalCriterion(str, Enum):
    NONLINEAR = "nonlinear"  # moving-average sensitivity s_bar
    LINEAR = "linear"  # plain weight norm ||w||


class SalMode(str, Enum):
    CONTINUOUS = "continuous"
    ONCE = "once"
    OFF = "off"


@dataclass(frozen=True)
class SalConfig:
    eta_sal: float = 2e-5
    beta: float = 0.99
    target: float = 1.0
    variant: SalVariant = SalVariant.FULL
    criterion: SalCriterion = SalCriterion.NONLINEAR
    mode: SalMode = SalMode.CONTINUOUS
    # False reproduces the chaos runs, where SAL never stops
    gated: bool = True

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        if self.eta_sal <= 0:
            raise ValueError(f"eta_sal must be > 0, got {self.eta_sal}")
        if self.target <= 0:
            raise ValueError(f"target must be > 0, got {self.target}")
        object.__setattr__(self, "variant", SalVariant(self.variant))
        object.__setattr__(self, "criterion", SalCriterion(self.criterion))
        object.__setattr__(self, "mode", SalMode(self.mode))


@dataclass
class SalState:
    """Moving-average sensitivity bookkeeping for a group of neurons.

    ``n`` counts forward computations and is never reset between patterns
    or epochs.  ``reached`` latches once the gating quantity first exceeds
    the target (used by the ``once`` mode).
    """

    s_bar: np.ndarray
    n: np.ndarray
    reached: np.ndarray
    applied: np.ndarray = field(default=None)  # how often SAL fired, per neuron

    @classmethod
    def zeros(cls, size: int) -> "SalState":
        return cls(
            s_bar=np.zeros(size),
            n=np.zeros(size, dtype=np.int64),
            reached=np.zeros(size, dtype=bool),
            applied=np.zeros(size, dtype=np.int64),
        )

    def copy(self) -> "SalState":
        return SalState(self.s_bar.copy(), self.n.copy(), self.reached.copy(), self.applied.copy())

    def __len__(self):
        return len(self.s_bar)


def fprime_from_output(o):
    return 1.0 - np.square(o)


def sensitivity(U, w) -> float:
    """``f'(U) * ||w||`` for one tanh neuron."""
    o = np.tanh(U)
    return float((1.0 - o * o) * np.linalg.norm(np.asarray(w, dtype=np.float64)))


def update_moving_average(state: SalState, s, beta: float) -> SalState:
    """Exponential moving average ``s_bar <- beta*s_bar + (1-beta)*s``; in place, returns state."""
    state.s_bar *= beta
    state.s_bar += (1.0 - beta) * np.asarray(s)
    state.n += 1
    return state


def sal_gate(state: SalState, config: SalConfig, w_norm) -> np.ndarray:
    """Which neurons receive SAL this step.

    Also latches ``state.reached`` for neurons whose gating quantity has
    passed the target, so that ``once`` mode stays off afterwards.
    """
    if config.mode is SalMode.OFF:
        return np.zeros(len(state), dtype=bool)
    quantity = state.s_bar if config.criterion is SalCriterion.NONLINEAR else np.asarray(w_norm)
    below = quantity <= config.target
    state.reached |= ~below
    if not config.gated:
        below = np.ones(len(state), dtype=bool)
    if config.mode is SalMode.ONCE:
        return below & ~state.reached
    return below


def sal_delta_w(w, x, o: float, config: SalConfig) -> np.ndarray:
    """Hill-climbing step on the weights that increases ``f'(U)||w||``."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape:
        raise ValueError(f"weight/input length mismatch: {w.shape} vs {x.shape}")
    w_norm = np.linalg.norm(w)
    if w_norm == 0.0:
        raise DegenerateError("SAL direction is undefined for a zero weight vector")
    fp = 1.0 - o * o
    step = w / w_norm
    if config.variant is SalVariant.FULL:
        step = step - 2.0 * o * w_norm * x
    return config.eta_sal * fp * step


def sal_delta_theta(o: float, w_norm: float, config: SalConfig) -> float:
    """Bias step pushing ``U`` toward 0."""
    return -2.0 * config.eta_sal * o * (1.0 - o * o) * w_norm


def row_norms(W: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", W, W))


def layer_sensitivities(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    o = np.tanh(U)
    return (1.0 - o * o) * row_norms(W)


def sal_layer_step(
    W: np.ndarray,
    mask: np.ndarray | None,
    theta: np.ndarray | None,
    x: np.ndarray,
    o: np.ndarray,
    state: SalState,
    config: SalConfig,
) -> np.ndarray:
    """One forward-step of SAL for a whole layer, in place.

    ``x`` is the input vector the layer just consumed and ``o`` its fresh
    output.  The moving average is updated first, then gated neurons are
    moved along the sensitivity gradient.  Masked entries of ``W`` stay
    exactly zero.  Returns the boolean vector of neurons that were updated.
    """
    norms = row_norms(W)
    fp = 1.0 - o * o
    update_moving_average(state, fp * norms, config.beta)
    gate = sal_gate(state, config, norms)
    gate &= norms > 0.0
    if not gate.any():
        return gate
    rows = np.flatnonzero(gate)
    g_norm = norms[rows]
    g_o = o[rows]
    g_fp = fp[rows]
    dW = W[rows] / g_norm[:, None]
    if config.variant is SalVariant.FULL:
        dW -= np.outer(2.0 * g_o * g_norm, x)
    dW *= (config.eta_sal * g_fp)[:, None]
    if mask is not None:
        dW *= mask[rows]
    W[rows] += dW
    if theta is not None:
        theta[rows] += -2.0 * config.eta_sal * g_o * g_fp * g_norm
    state.applied[rows] += 1
    return gate
