"""Gradient learning (BP / BPTT) interleaved with SAL.

Per pattern presentation the order is always: forward computation with SAL
applied to each gated hidden neuron right after its output is computed,
then one backward pass that uses the post-SAL weights, then the SGD update.
Learning is purely per-pattern; there is no batching.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import _kernels
from .networks import NetworkState, Topology, dfnn_hidden_rate
from .numerics import Rng, scale_to_spectral_radius
from .sal import SalConfig, SalCriterion, SalMode, SalVariant
from .tasks import noisy_inputs, parity3_patterns, parity8_clean_inputs

FORWARD, PROBE, LEARN = 0, 1, 2

ELMAN_STEPS_PROBED = (0, 100, 200, 300)


class Case(str, Enum):
    """Ablation variants of SAL + BPTT on the 3-bit parity task."""

    A = "A"  # nonlinear SAL, nonlinear criterion
    A2 = "A2"  # as A, no tanh in BPTT
    B = "B"  # as A, SAL only until the target is first reached
    C = "C"  # nonlinear SAL, ||w|| criterion
    D = "D"  # linear SAL, s_bar criterion
    E = "E"  # linear SAL, ||w|| criterion
    F = "F"  # no SAL
    G = "G"  # no SAL, feedback matrix rescaled to a chosen spectral radius

    @classmethod
    def parse(cls, text: str) -> "Case":
        text = text.strip().upper().replace("'", "2")
        return cls(text)


_CASE_FLAGS = {
    Case.A: (SalMode.CONTINUOUS, SalVariant.FULL, SalCriterion.NONLINEAR, True),
    Case.A2: (SalMode.CONTINUOUS, SalVariant.FULL, SalCriterion.NONLINEAR, False),
    Case.B: (SalMode.ONCE, SalVariant.FULL, SalCriterion.NONLINEAR, True),
    Case.C: (SalMode.CONTINUOUS, SalVariant.FULL, SalCriterion.LINEAR, True),
    Case.D: (SalMode.CONTINUOUS, SalVariant.LINEAR, SalCriterion.NONLINEAR, True),
    Case.E: (SalMode.CONTINUOUS, SalVariant.LINEAR, SalCriterion.LINEAR, True),
    Case.F: (SalMode.OFF, SalVariant.FULL, SalCriterion.NONLINEAR, True),
    Case.G: (SalMode.OFF, SalVariant.FULL, SalCriterion.NONLINEAR, True),
}

ELMAN_RATES = {
    "input->hidden": 0.4,
    "hidden->output": 0.1,
    "hidden->hidden": 0.00004,
    "hidden-bias": 0.00004,
    "output-bias": 0.1,
}


@dataclass(frozen=True)
class TrainConfig:
    eta_bp: dict = field(default_factory=lambda: dict(ELMAN_RATES))
    tanh_in_backprop: bool = True
    tanh_at_output: bool = True
    sal: SalConfig = field(default_factory=lambda: SalConfig(eta_sal=0.0002, beta=0.999))
    case: Case | None = None
    epochs: int = 1000
    success_threshold: float = 0.01
    spectral_radius: float | None = None  # case G only
    dfnn_success_rms: float = 0.4
    eval_every: int = 0  # DFNN: noiseless evaluation cadence, 0 = only at the end

    @classmethod
    def for_case(cls, case, **overrides) -> "TrainConfig":
        case = Case.parse(case) if isinstance(case, str) else Case(case)
        mode, variant, criterion, squash = _CASE_FLAGS[case]
        sal_kw = {"eta_sal": 0.0002, "beta": 0.999, **overrides.pop("sal_kw", {})}
        sal = SalConfig(variant=variant, criterion=criterion, mode=mode, **sal_kw)
        cfg = cls(sal=sal, case=case, tanh_in_backprop=squash, tanh_at_output=squash)
        if case is Case.G and overrides.get("spectral_radius") is None:
            overrides["spectral_radius"] = 1.38
        return replace(cfg, **overrides)

    @classmethod
    def for_dfnn(cls, layers: int, sal: bool = True, tanh_bp: bool = True, once: bool = False, **overrides) -> "TrainConfig":
        rate = dfnn_hidden_rate(layers)
        mode = SalMode.OFF if not sal else (SalMode.ONCE if once else SalMode.CONTINUOUS)
        cfg = cls(
            eta_bp={"input->hidden": 0.02, "hidden": rate},
            tanh_in_backprop=tanh_bp,
            tanh_at_output=tanh_bp,
            sal=SalConfig(eta_sal=0.001, beta=0.99, mode=mode),
            epochs=5000,
        )
        return replace(cfg, **overrides)

    @property
    def sal_on(self) -> bool:
        return self.sal.mode is not SalMode.OFF


def squash_delta(delta_hat: float, fprime: float, enabled: bool = True) -> float:
    """Error signal on the internal state, optionally bounded by tanh."""
    v = delta_hat * fprime
    return math.tanh(v) if enabled else v


def _sal_args(cfg: SalConfig, on: bool):
    return (
        on,
        cfg.eta_sal,
        cfg.beta,
        cfg.target,
        cfg.variant is SalVariant.FULL,
        cfg.criterion is SalCriterion.NONLINEAR,
        cfg.mode is SalMode.ONCE,
        cfg.gated,
    )


@dataclass
class PatternRecord:
    """What one presentation of a pattern measured."""

    epoch: int
    pattern: int
    error: float
    output: float
    delta_rms: dict  # probed step (or layer) -> RMS error signal
    s_mean: float = float("nan")
    s_std: float = float("nan")
    sal_neurons: int = 0


class _ElmanWork:
    def __init__(self, hidden: int, t_max: int):
        self.U = np.zeros((t_max + 1, hidden))
        self.O = np.zeros((t_max + 1, hidden))
        self.delta_rms = np.zeros(t_max + 1)
        self.sens = np.zeros(3)
        self.applied_now = np.zeros(hidden, dtype=np.bool_)


def bptt_pattern(net: NetworkState, x_seq: np.ndarray, target: float, config: TrainConfig,
                 mode: int = LEARN, work: _ElmanWork | None = None):
    """One presentation to an Elman RNN: forward + SAL, then BPTT.

    ``mode`` is ``LEARN`` (SAL and weight updates), ``PROBE`` (backward
    pass for measurement only) or ``FORWARD``.  Returns
    ``(net, error, record)``, where ``record`` carries the error-signal RMS
    at the probed steps and the sensitivity statistics pooled over neurons
    and steps.  ``error`` is ``d - y``; NaN marks divergence.
    """
    if net.topology is not Topology.ELMAN:
        raise ValueError("bptt_pattern needs an Elman RNN")
    p = net.params
    H = p["W_fb"].shape[0]
    t_max = x_seq.shape[0] - 1
    work = work or _ElmanWork(H, t_max)
    work.sens[:] = 0.0
    rates = config.eta_bp
    err, y = _kernels.elman_pattern(
        p["W_in"], p["W_fb"], p["theta_h"], p["W_out"][0], p["theta_out"],
        np.ascontiguousarray(x_seq, dtype=np.float64), float(target),
        *_sal_args(config.sal, config.sal_on and mode == LEARN),
        p["sal_s_bar"], p["sal_n"], p["sal_reached"], p["sal_applied"],
        mode, rates["input->hidden"], rates["hidden->hidden"], rates["hidden->output"],
        rates["hidden-bias"], rates["output-bias"],
        config.tanh_in_backprop, config.tanh_at_output,
        work.U, work.O, work.delta_rms, work.sens, work.applied_now,
    )
    net.u[0] = work.U[-1].copy()
    net.o[0] = work.O[-1].copy()
    net.o[1] = np.array([y])
    net.u[1] = np.array([np.arctanh(y) if abs(y) < 1 else np.sign(y) * np.inf])
    net.t += t_max + 1
    cnt = work.sens[2]
    mean = work.sens[0] / cnt if cnt else float("nan")
    var = max(work.sens[1] / cnt - mean * mean, 0.0) if cnt else float("nan")
    probed = {t: float(work.delta_rms[t]) for t in ELMAN_STEPS_PROBED if t <= t_max} if mode != FORWARD else {}
    rec = PatternRecord(-1, -1, float(err), float(y), probed, mean, math.sqrt(var), int(work.applied_now.sum()))
    if not all(np.isfinite(a).all() for a in (p["W_fb"], p["W_in"], p["W_out"])):
        rec.error = float("nan")
    return net, rec.error, rec


class _DfnnWork:
    def __init__(self, hidden_layers: int, width: int):
        self.U = np.zeros((hidden_layers, width))
        self.O = np.zeros((hidden_layers, width))
        self.delta_rms = np.zeros(hidden_layers)
        self.dhat = np.zeros(width)
        self.delta = np.zeros(width)


def _dfnn_arrays(net: NetworkState):
    p = net.params
    return p["W_first"], p["b_hidden"], p["W_hidden"], p["W_out"][0], p["b_out"]


def _dfnn_sal_arrays(net: NetworkState):
    p = net.params
    return p["sal_s_bar"], p["sal_n"], p["sal_reached"], p["sal_applied"]


def bp_pattern(net: NetworkState, x, target: float, config: TrainConfig, mode: int = LEARN,
               work: _DfnnWork | None = None):
    """One presentation to a DFNN: forward + per-neuron SAL, then BP.

    Returns ``(net, error, delta_rms)`` with ``delta_rms[k]`` the RMS error
    signal of hidden layer ``k`` (bottom first).
    """
    if net.topology is not Topology.DFNN:
        raise ValueError("bp_pattern needs a DFNN")
    Lh, H = net.params["b_hidden"].shape
    work = work or _DfnnWork(Lh, H)
    x = np.ascontiguousarray(x, dtype=np.float64)
    err, y = _kernels.dfnn_pattern(
        *_dfnn_arrays(net), x, float(target),
        *_sal_args(config.sal, config.sal_on and mode == LEARN),
        *_dfnn_sal_arrays(net),
        mode, config.eta_bp["input->hidden"], config.eta_bp["hidden"],
        config.tanh_in_backprop, config.tanh_at_output,
        work.U, work.O, work.delta_rms, work.dhat, work.delta,
    )
    for k in range(Lh):
        net.u[k], net.o[k] = work.U[k].copy(), work.O[k].copy()
    net.o[-1] = np.array([y])
    return net, float(err), work.delta_rms.copy()


def dfnn_outputs(net: NetworkState, X: np.ndarray, keep_layers=()) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless outputs for each row of ``X`` and hidden activations of ``keep_layers``."""
    Lh, H = net.params["b_hidden"].shape
    keep = np.asarray(keep_layers, dtype=np.int64)
    hidden = np.zeros((len(keep), X.shape[0], H))
    y = _kernels.dfnn_outputs(*_dfnn_arrays(net), np.ascontiguousarray(X, dtype=np.float64), hidden, keep)
    return y, hidden


def dfnn_delta_probe(net: NetworkState, config: TrainConfig) -> np.ndarray:
    """RMS (over the 256 noiseless patterns and the neurons) error signal per hidden layer, no learning."""
    X, targets = parity8_clean_inputs()
    Lh, H = net.params["b_hidden"].shape
    work = _DfnnWork(Lh, H)
    acc = np.zeros(Lh)
    for x, d in zip(X, targets):
        _, _, drms = bp_pattern(net, x, d, config, mode=PROBE, work=work)
        acc += drms ** 2
    return np.sqrt(acc / len(X))


@dataclass
class RunResult:
    success: bool
    epochs_used: int
    error_trace: list  # per-epoch RMS error over the epoch's presentations
    probes: list  # PatternRecord per presentation (RNN) / per-epoch dicts (DFNN)
    diverged: bool = False
    final_error: float = float("nan")
    pre_delta: np.ndarray | None = None


def prepare_case_g(net: NetworkState, config: TrainConfig) -> None:
    """Rescale the feedback matrix in place to ``config.spectral_radius``."""
    if config.spectral_radius is not None:
        net.params["W_fb"][...] = scale_to_spectral_radius(net.params["W_fb"], config.spectral_radius)


def run_training(net: NetworkState, config: TrainConfig, rng: Rng | None = None, record_probes: bool = True) -> RunResult:
    """Full training run; Elman nets get the 3-bit lag task, DFNNs noisy 8-bit parity."""
    if net.topology is Topology.ELMAN:
        return _train_elman(net, config, record_probes)
    if net.topology is Topology.DFNN:
        if rng is None:
            raise ValueError("DFNN training draws noise and orders; pass an Rng")
        return _train_dfnn(net, config, rng)
    raise ValueError(f"no supervised task for {net.topology.value}")


def _train_elman(net: NetworkState, config: TrainConfig, record_probes: bool) -> RunResult:
    if config.case is Case.G:
        prepare_case_g(net, config)
    patterns = parity3_patterns()
    seqs = [p.inputs(net.params["W_in"].shape[1]) for p in patterns]
    work = _ElmanWork(net.params["W_fb"].shape[0], seqs[0].shape[0] - 1)
    trace, probes = [], []
    success, diverged, epoch = False, False, 0
    for epoch in range(config.epochs + 1):
        # epoch 0 only measures the untrained network
        mode = PROBE if epoch == 0 else LEARN
        errs = []
        for i, (pat, x) in enumerate(zip(patterns, seqs)):
            _, err, rec = bptt_pattern(net, x, pat.target, config, mode=mode, work=work)
            rec.epoch, rec.pattern = epoch, i
            errs.append(err)
            if record_probes:
                probes.append(rec)
            if not math.isfinite(err):
                diverged = True
                break
        trace.append(float(np.sqrt(np.mean(np.square(errs)))))
        if diverged:
            break
        if epoch > 0 and max(abs(e) for e in errs) < config.success_threshold:
            success = True
            break
    return RunResult(success, epoch, trace, probes, diverged)


def _train_dfnn(net: NetworkState, config: TrainConfig, rng: Rng) -> RunResult:
    clean, targets = parity8_clean_inputs()
    Lh, H = net.params["b_hidden"].shape
    pre_delta = dfnn_delta_probe(net, config)
    work = _DfnnWork(Lh, H)
    errors = np.zeros(len(clean))
    sal = _sal_args(config.sal, config.sal_on)
    trace, probes = [], []
    diverged = False
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        X = noisy_inputs(clean, rng)
        order = rng.permutation(len(clean)).astype(np.int64)
        ok = _kernels.dfnn_epoch(
            *_dfnn_arrays(net), X, targets, order, *sal, *_dfnn_sal_arrays(net),
            LEARN, config.eta_bp["input->hidden"], config.eta_bp["hidden"],
            config.tanh_in_backprop, config.tanh_at_output,
            work.U, work.O, work.delta_rms, errors,
        )
        if not ok or not np.isfinite(net.params["W_out"]).all():
            diverged = True
            trace.append(float("nan"))
            break
        trace.append(float(np.sqrt(np.mean(errors ** 2))))
        if config.eval_every and epoch % config.eval_every == 0:
            y, _ = dfnn_outputs(net, clean)
            probes.append({"epoch": epoch, "clean_rms": float(np.sqrt(np.mean((targets - y) ** 2)))})
    if diverged:
        final = float("nan")
    else:
        y, _ = dfnn_outputs(net, clean)
        final = float(np.sqrt(np.mean((targets - y) ** 2)))
    success = (not diverged) and final < config.dfnn_success_rms
    return RunResult(success, epoch, trace, probes, diverged, final, pre_delta)
