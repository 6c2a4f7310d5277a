"""Network topologies, forward computation and layer Jacobians.

Parameters of a network live in one flat ``params`` dict of numpy arrays
(the snapshot format and what the compiled kernels consume).  The
``layers`` list holds :class:`DenseLayer` views into those arrays, one per
group of incoming connections, so code can address "the feedback weights of
the hidden layer" without knowing the packing.

Two-layer RNN step order: layer 2 reads layer 1's current output, then
layer 1 reads layer 2's fresh output.  One step is therefore a full trip
around the loop and layer 1's internal state ``u1`` alone determines the
next state, which is where perturbations are injected and separations are
measured.  ``synchronous=True`` on the spec selects the alternative in
which both layers read the previous step's outputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .numerics import Rng
from .sal import SalState

__all__ = [
    "Topology",
    "DenseLayer",
    "NetworkState",
    "FlatRnnSpec",
    "TwoLayerRnnSpec",
    "ElmanSpec",
    "DfnnSpec",
    "DFNN_HIDDEN_RATES",
    "init_network",
    "flat_step",
    "elman_step",
    "elman_output",
    "dfnn_forward",
    "layer_jacobian",
    "save_snapshot",
    "load_snapshot",
]


class Topology(str, Enum):
    FLAT = "flat-rnn"
    TWO_LAYER = "two-layer-rnn"
    ELMAN = "elman-rnn"
    DFNN = "dfnn"


# learning rate for every DFNN weight group except input->hidden, by layer count
DFNN_HIDDEN_RATES = {3: 0.01, 5: 0.003, 10: 0.001, 30: 0.0007, 100: 0.0005, 200: 0.0004, 300: 0.0003, 1000: 0.0001}


def dfnn_hidden_rate(layers: int) -> float:
    """Tabulated rate; other depths interpolate log-log between neighbours."""
    if layers in DFNN_HIDDEN_RATES:
        return DFNN_HIDDEN_RATES[layers]
    keys = sorted(DFNN_HIDDEN_RATES)
    if layers < keys[0]:
        return DFNN_HIDDEN_RATES[keys[0]]
    if layers > keys[-1]:
        return DFNN_HIDDEN_RATES[keys[-1]]
    hi = next(k for k in keys if k > layers)
    lo = max(k for k in keys if k < layers)
    f = (np.log(layers) - np.log(lo)) / (np.log(hi) - np.log(lo))
    return float(np.exp((1 - f) * np.log(DFNN_HIDDEN_RATES[lo]) + f * np.log(DFNN_HIDDEN_RATES[hi])))


@dataclass
class DenseLayer:
    """Incoming connections of one group of neurons.

    ``W`` is ``(n, m)``: row ``j`` is neuron ``j``'s incoming weight vector.
    ``mask`` is ``None`` for full connectivity.  ``sal`` is ``None`` for
    groups that SAL never touches.
    """

    W: np.ndarray
    mask: np.ndarray | None
    theta: np.ndarray | None
    sal: SalState | None
    group: str

    @property
    def shape(self):
        return self.W.shape


@dataclass(frozen=True)
class FlatRnnSpec:
    n: int = 100
    rate: float = 1.0
    init: float = 0.01
    self_connections: bool = True
    activation: str = "tanh"


@dataclass(frozen=True)
class TwoLayerRnnSpec:
    n1: int = 1000
    n2: int = 100
    rate_1_from_2: float = 0.1
    rate_2_from_1: float = 1.0
    init: float = 0.03
    synchronous: bool = False
    activation: str = "tanh"


@dataclass(frozen=True)
class ElmanSpec:
    n_in: int = 3
    hidden: int = 20
    n_out: int = 1
    init_in: float = 0.0
    init_fb: float = 0.1
    init_out: float = 0.3


@dataclass(frozen=True)
class DfnnSpec:
    layers: int = 10  # counts the input and output layers
    width: int = 20
    n_in: int = 8
    init_scale: float = 0.1  # hidden -> hidden
    init_io: float = 0.1  # input -> hidden and hidden -> output

    @property
    def hidden_layers(self) -> int:
        return self.layers - 2


@dataclass
class NetworkState:
    topology: Topology
    params: dict[str, np.ndarray]
    u: list[np.ndarray]
    o: list[np.ndarray]
    t: int = 0
    activation: str = "tanh"
    synchronous: bool = False
    layers: list[DenseLayer] = field(init=False, repr=False)

    def __post_init__(self):
        self.topology = Topology(self.topology)
        self.layers = _bind_layers(self)

    def copy(self) -> "NetworkState":
        return NetworkState(
            self.topology,
            {k: v.copy() for k, v in self.params.items()},
            [x.copy() for x in self.u],
            [x.copy() for x in self.o],
            self.t,
            self.activation,
            self.synchronous,
        )

    def act(self, u):
        if self.activation == "identity":
            return u.copy()
        return np.tanh(u)

    def sal_states(self) -> list[SalState]:
        return [layer.sal for layer in self.layers if layer.sal is not None]


def _sal_view(params, prefix, index=None) -> SalState:
    pick = (lambda a: a) if index is None else (lambda a: a[index])
    return SalState(
        pick(params[prefix + "s_bar"]),
        pick(params[prefix + "n"]),
        pick(params[prefix + "reached"]),
        pick(params[prefix + "applied"]),
    )


def _sal_arrays(prefix: str, shape) -> dict[str, np.ndarray]:
    return {
        prefix + "s_bar": np.zeros(shape),
        prefix + "n": np.zeros(shape, dtype=np.int64),
        prefix + "reached": np.zeros(shape, dtype=bool),
        prefix + "applied": np.zeros(shape, dtype=np.int64),
    }


def _bind_layers(state: NetworkState) -> list[DenseLayer]:
    p = state.params
    top = state.topology
    if top is Topology.FLAT:
        return [DenseLayer(p["W"], p["mask"], None, _sal_view(p, "sal_"), "recurrent")]
    if top is Topology.TWO_LAYER:
        return [
            DenseLayer(p["W1"], p["mask1"], None, _sal_view(p, "sal1_"), "layer1<-layer2"),
            DenseLayer(p["W2"], p["mask2"], None, _sal_view(p, "sal2_"), "layer2<-layer1"),
        ]
    if top is Topology.ELMAN:
        return [
            DenseLayer(p["W_in"], None, None, None, "input->hidden"),
            DenseLayer(p["W_fb"], None, p["theta_h"], _sal_view(p, "sal_"), "hidden->hidden"),
            DenseLayer(p["W_out"], None, p["theta_out"], None, "hidden->output"),
        ]
    if top is Topology.DFNN:
        Lh = p["b_hidden"].shape[0]
        layers = [DenseLayer(p["W_first"], None, p["b_hidden"][0], _sal_view(p, "sal_", 0), "input->hidden")]
        for k in range(1, Lh):
            layers.append(
                DenseLayer(p["W_hidden"][k - 1], None, p["b_hidden"][k], _sal_view(p, "sal_", k), "hidden->hidden")
            )
        layers.append(DenseLayer(p["W_out"], None, p["b_out"], None, "hidden->output"))
        return layers
    raise ValueError(f"unknown topology {top}")


def _check_rate(rate: float):
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"connection rate must be in [0, 1], got {rate}")


def _masked_uniform(rng: Rng, shape, rate: float, scale: float, diagonal: bool = True):
    _check_rate(rate)
    mask = rng.bernoulli(rate, shape).astype(np.float64)
    if not diagonal:
        np.fill_diagonal(mask, 0.0)
    W = rng.uniform(-scale, scale, shape) * mask
    return W, mask


def init_network(spec, rng: Rng) -> NetworkState:
    """Fresh network for one of the four topology specs."""
    if isinstance(spec, FlatRnnSpec):
        W, mask = _masked_uniform(rng, (spec.n, spec.n), spec.rate, spec.init, spec.self_connections)
        params = {"W": W, "mask": mask, **_sal_arrays("sal_", spec.n)}
        z = np.zeros(spec.n)
        return NetworkState(Topology.FLAT, params, [z.copy()], [z.copy()], activation=spec.activation)
    if isinstance(spec, TwoLayerRnnSpec):
        W1, mask1 = _masked_uniform(rng, (spec.n1, spec.n2), spec.rate_1_from_2, spec.init)
        W2, mask2 = _masked_uniform(rng, (spec.n2, spec.n1), spec.rate_2_from_1, spec.init)
        params = {
            "W1": W1, "mask1": mask1, "W2": W2, "mask2": mask2,
            **_sal_arrays("sal1_", spec.n1), **_sal_arrays("sal2_", spec.n2),
        }
        u = [np.zeros(spec.n1), np.zeros(spec.n2)]
        return NetworkState(
            Topology.TWO_LAYER, params, u, [x.copy() for x in u],
            activation=spec.activation, synchronous=spec.synchronous,
        )
    if isinstance(spec, ElmanSpec):
        H = spec.hidden
        params = {
            "W_in": rng.uniform(-spec.init_in, spec.init_in, (H, spec.n_in)),
            "W_fb": rng.uniform(-spec.init_fb, spec.init_fb, (H, H)),
            "theta_h": rng.uniform(-spec.init_fb, spec.init_fb, H),
            "W_out": rng.uniform(-spec.init_out, spec.init_out, (spec.n_out, H)),
            "theta_out": rng.uniform(-spec.init_out, spec.init_out, spec.n_out),
            **_sal_arrays("sal_", H),
        }
        u = [np.zeros(H), np.zeros(spec.n_out)]
        return NetworkState(Topology.ELMAN, params, u, [x.copy() for x in u])
    if isinstance(spec, DfnnSpec):
        Lh, H = spec.hidden_layers, spec.width
        if Lh < 1:
            raise ValueError("a DFNN needs at least 3 layers (one hidden)")
        b = np.empty((Lh, H))
        W_first = rng.uniform(-spec.init_io, spec.init_io, (H, spec.n_in))
        b[0] = rng.uniform(-spec.init_io, spec.init_io, H)
        W_hidden = rng.uniform(-spec.init_scale, spec.init_scale, (Lh - 1, H, H))
        b[1:] = rng.uniform(-spec.init_scale, spec.init_scale, (Lh - 1, H))
        params = {
            "W_first": W_first, "W_hidden": W_hidden, "b_hidden": b,
            "W_out": rng.uniform(-spec.init_io, spec.init_io, (1, H)),
            "b_out": rng.uniform(-spec.init_io, spec.init_io, 1),
            **_sal_arrays("sal_", (Lh, H)),
        }
        u = [np.zeros(H) for _ in range(Lh)] + [np.zeros(1)]
        return NetworkState(Topology.DFNN, params, u, [x.copy() for x in u])
    raise TypeError(f"unsupported network spec {type(spec).__name__}")


def flat_step(state: NetworkState, perturbation: np.ndarray | None = None) -> NetworkState:
    """Advance a flat or two-layer RNN by one step, in place.

    ``perturbation`` is added to the internal state of the (first) layer
    before the activation is applied.
    """
    if state.topology is Topology.FLAT:
        W = state.params["W"]
        u = W @ state.o[0]
        if perturbation is not None:
            if perturbation.shape != u.shape:
                raise ValueError(f"perturbation shape {perturbation.shape} != state shape {u.shape}")
            u += perturbation
        state.u[0] = u
        state.o[0] = state.act(u)
    elif state.topology is Topology.TWO_LAYER:
        W1, W2 = state.params["W1"], state.params["W2"]
        if perturbation is not None and perturbation.shape != state.u[0].shape:
            raise ValueError(f"perturbation shape {perturbation.shape} != layer-1 shape {state.u[0].shape}")
        o2_prev = state.o[1]
        u2 = W2 @ state.o[0]
        state.u[1] = u2
        state.o[1] = state.act(u2)
        u1 = W1 @ (o2_prev if state.synchronous else state.o[1])
        if perturbation is not None:
            u1 += perturbation
        state.u[0] = u1
        state.o[0] = state.act(u1)
    else:
        raise ValueError(f"flat_step needs a flat or two-layer RNN, got {state.topology.value}")
    state.t += 1
    return state


def elman_step(state: NetworkState, x_t) -> NetworkState:
    """Hidden update ``o_h = tanh(W_in x + W_fb o_h_prev + theta_h)``, in place."""
    if state.topology is not Topology.ELMAN:
        raise ValueError("elman_step needs an Elman RNN")
    p = state.params
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (p["W_in"].shape[1],):
        raise ValueError(f"input must have shape {(p['W_in'].shape[1],)}, got {x_t.shape}")
    u = p["W_in"] @ x_t + p["W_fb"] @ state.o[0] + p["theta_h"]
    state.u[0] = u
    state.o[0] = np.tanh(u)
    state.t += 1
    return state


def elman_output(state: NetworkState) -> np.ndarray:
    p = state.params
    u = p["W_out"] @ state.o[0] + p["theta_out"]
    state.u[1] = u
    state.o[1] = np.tanh(u)
    return state.o[1]


def dfnn_forward(state: NetworkState, x) -> list[tuple[np.ndarray, np.ndarray]]:
    """Layer-by-layer ``(U, o)`` for every hidden layer and the output layer."""
    if state.topology is not Topology.DFNN:
        raise ValueError("dfnn_forward needs a DFNN")
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (state.layers[0].W.shape[1],):
        raise ValueError(f"input must have shape {(state.layers[0].W.shape[1],)}, got {a.shape}")
    out = []
    for layer in state.layers:
        U = layer.W @ a + layer.theta
        a = np.tanh(U)
        out.append((U, a))
    for i, (U, o) in enumerate(out):
        state.u[i], state.o[i] = U, o
    return out


def layer_jacobian(U, W) -> np.ndarray:
    """``d o / d x`` of a tanh layer: row ``j`` is ``f'(U_j) w_j``."""
    U = np.asarray(U, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or U.shape != (W.shape[0],):
        raise ValueError(f"U shape {U.shape} does not match W shape {W.shape}")
    o = np.tanh(U)
    return (1.0 - o * o)[:, None] * W


def save_snapshot(state: NetworkState, path) -> None:
    """Write an ``.npz`` snapshot: every ``params`` array plus the dynamic state.

    Keys: the parameter names as-is, ``u_<i>``/``o_<i>`` for the state
    vectors and ``meta`` (a JSON string with topology, t, activation and
    synchronous).
    """
    meta = json.dumps({
        "topology": state.topology.value, "t": state.t,
        "activation": state.activation, "synchronous": state.synchronous,
        "n_state": len(state.u),
    }, sort_keys=True)
    arrays = dict(state.params)
    for i, (u, o) in enumerate(zip(state.u, state.o)):
        arrays[f"u_{i}"] = u
        arrays[f"o_{i}"] = o
    arrays["meta"] = np.array(meta)
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_snapshot(path) -> NetworkState:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        n_state = meta["n_state"]
        skip = {"meta"} | {f"u_{i}" for i in range(n_state)} | {f"o_{i}" for i in range(n_state)}
        params = {k: data[k].copy() for k in data.files if k not in skip}
        u = [data[f"u_{i}"].copy() for i in range(n_state)]
        o = [data[f"o_{i}"].copy() for i in range(n_state)]
    return NetworkState(meta["topology"], params, u, o, meta["t"], meta["activation"], meta["synchronous"])
