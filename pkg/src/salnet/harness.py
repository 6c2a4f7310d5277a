"""Experiment drivers: chaos generation, parity learning ablations, DFNN sweeps, output analysis.

Every driver is a pure function of its :class:`ExperimentSpec`.  Run ``i``
draws all of its randomness from ``Rng(spec.seed, i)``; λ probes draw from
a separate stream keyed by the probe step so that probing never shifts the
training stream.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .learning import (
    Case,
    TrainConfig,
    dfnn_delta_probe,
    dfnn_outputs,
    run_training,
)
from .lyapunov import log_sensitivity, probe_lambda, sensitivities
from .networks import (
    DfnnSpec,
    ElmanSpec,
    FlatRnnSpec,
    NetworkState,
    TwoLayerRnnSpec,
    flat_step,
    init_network,
)
from .numerics import Rng, pca_top2, random_unit_vector
from .sal import SalConfig, SalMode, sal_layer_step
from .tasks import random_probe_inputs

KINDS = ("chaos-flat", "chaos-2layer", "rnn-parity", "dfnn-parity", "dfnn-probe", "analyze")

# λ probes use run indices far above any real run count
PROBE_STREAM = 1 << 32

BAND = (0.75, 0.85)

# (eta_sal, beta) per experiment kind
SAL_DEFAULTS = {
    "chaos-flat": (0.00002, 0.99),
    "chaos-2layer": (0.00002, 0.99),
    "rnn-parity": (0.0002, 0.999),
    "dfnn-parity": (0.001, 0.99),
    "dfnn-probe": (0.001, 0.99),
    "analyze": (0.001, 0.99),
}


def _radii(lo=1.0, hi=2.0, step=0.1):
    return tuple(round(lo + k * step, 10) for k in range(int(round((hi - lo) / step)) + 1))


@dataclass(frozen=True)
class ExperimentSpec:
    """All knobs of one experiment.

    Count-like fields left at ``None`` resolve to desk-scale or paper-scale
    values depending on ``paper_scale``; see :meth:`resolved`.
    """

    kind: str = "chaos-flat"
    seed: int = 1
    runs: int | None = None
    paper_scale: bool = False
    # SAL; None picks the experiment's own default (see SAL_DEFAULTS)
    eta_sal: float | None = None
    beta: float | None = None
    # chaos generation
    neurons: int = 100
    rate: float = 1.0
    init_chaos: float = 0.01
    n1: int = 1000
    n2: int = 100
    rate_1_from_2: float = 0.1
    rate_2_from_1: float = 1.0
    init_2layer: float = 0.03
    synchronous: bool = False
    stop_at_target: bool = False
    target: float = 1.0
    perturb_interval: int = 1000
    perturb_size: float = 0.001
    steps: int | None = None
    probe_every: int = 100
    lyap_d0: float = 0.001
    lyap_warmup: int = 100
    lyap_window: int = 1000
    # sequential parity with an Elman RNN
    case: str = "A"
    epochs: int = 1000
    success_threshold: float = 0.01
    spectral_radius: float | None = None
    radius_lo: float = 1.0
    radius_hi: float = 2.0
    radius_step: float | None = None
    tanh_bp: bool = True
    # deep feedforward nets on noisy 8-bit parity
    layers: int = 30
    init_scale: float = 0.1
    sal: bool = True
    dfnn_epochs: int | None = None
    dfnn_success_rms: float = 0.4
    depths: tuple = ()
    init_scales: tuple = ()
    # output analysis
    analyze_depths: tuple = (3, 30, 100)
    nets: int | None = None
    probe_inputs: int = 1000
    bins: int = 20
    pca_layers: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.beta is not None and not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must satisfy 0 <= beta < 1, got {self.beta}")
        if self.eta_sal is not None and self.eta_sal < 0.0:
            raise ValueError(f"eta_sal must be non-negative, got {self.eta_sal}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for name in ("runs", "steps", "dfnn_epochs", "nets"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("rate", "rate_1_from_2", "rate_2_from_1"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        Case.parse(self.case)

    def resolved(self) -> "ExperimentSpec":
        """Fill every ``None`` count with its scale-dependent default."""
        paper = self.paper_scale
        runs = self.runs
        if runs is None:
            runs = {"rnn-parity": 100 if paper else 10, "dfnn-parity": 20 if paper else 5,
                    "dfnn-probe": 20 if paper else 5}.get(self.kind, 1)
        steps = self.steps or (100000 if paper else 60000)
        eta, beta = SAL_DEFAULTS[self.kind]
        return replace(
            self,
            eta_sal=eta if self.eta_sal is None else self.eta_sal,
            beta=beta if self.beta is None else self.beta,
            runs=runs,
            steps=steps,
            dfnn_epochs=self.dfnn_epochs or (5000 if paper else 300),
            nets=self.nets or (20 if paper else 5),
            radius_step=self.radius_step or (0.01 if paper else 0.1),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class MetricsRow:
    """One probe-interval measurement; unused fields stay NaN."""

    run: int
    step: int
    max_abs_o: float = math.nan
    mean_abs_o: float = math.nan
    w_sample: tuple = ()
    rms_sens: float = math.nan
    sens_std: float = math.nan
    log_sens: tuple = ()
    log_sens_total: float = math.nan
    lam: float = math.nan
    error: float = math.nan
    delta_rms: tuple = ()
    sal_applied: int = 0
    flags: str = ""


W_SAMPLES = 4

# fixed column layout per experiment kind
SCHEMAS = {
    "chaos-flat": ["run", "step", "max_abs_o", "mean_abs_o"] + [f"w{i}" for i in range(W_SAMPLES)]
    + ["rms_sens", "log_sens_total", "lam", "sal_applied"],
    "chaos-2layer": ["run", "step", "max_abs_o", "mean_abs_o"] + [f"w{i}" for i in range(W_SAMPLES)]
    + ["rms_sens", "log_sens_1", "log_sens_2", "log_sens_total", "lam", "sal_applied"],
    "rnn-parity": ["run", "epoch", "max_abs_o", "sens_mean", "sens_std", "error",
                   "delta_t0", "delta_t100", "delta_t200", "delta_t300", "sal_applied", "flags"],
    "dfnn-parity": ["run", "epoch", "error", "flags"],
}


def row_values(kind: str, row: MetricsRow) -> list:
    """Flatten ``row`` into the column order of ``SCHEMAS[kind]``."""
    w = list(row.w_sample) + [math.nan] * (W_SAMPLES - len(row.w_sample))
    if kind == "chaos-flat":
        return [row.run, row.step, row.max_abs_o, row.mean_abs_o, *w[:W_SAMPLES],
                row.rms_sens, row.log_sens_total, row.lam, row.sal_applied]
    if kind == "chaos-2layer":
        ls = list(row.log_sens) + [math.nan] * (2 - len(row.log_sens))
        return [row.run, row.step, row.max_abs_o, row.mean_abs_o, *w[:W_SAMPLES],
                row.rms_sens, ls[0], ls[1], row.log_sens_total, row.lam, row.sal_applied]
    if kind == "rnn-parity":
        d = list(row.delta_rms) + [math.nan] * (4 - len(row.delta_rms))
        return [row.run, row.step, row.max_abs_o, row.rms_sens, row.sens_std, row.error,
                *d[:4], row.sal_applied, row.flags]
    if kind == "dfnn-parity":
        return [row.run, row.step, row.error, row.flags]
    raise ValueError(f"no row schema for {kind!r}")


# ---------------------------------------------------------------- chaos


def _chaos_sal_config(spec: ExperimentSpec) -> SalConfig:
    return SalConfig(
        eta_sal=spec.eta_sal, beta=spec.beta, target=spec.target,
        mode=SalMode.CONTINUOUS, gated=spec.stop_at_target,
    )


def _weight_sample(net: NetworkState) -> tuple:
    W = net.layers[0].W
    idx = np.flatnonzero(net.layers[0].mask.ravel())[:W_SAMPLES] if net.layers[0].mask is not None else range(W_SAMPLES)
    return tuple(float(W.ravel()[i]) for i in idx)


def _chaos_row(net: NetworkState, spec: ExperimentSpec, run: int, step: int) -> MetricsRow:
    per_layer, total = log_sensitivity(net)
    s = np.concatenate(sensitivities(net))
    probe = probe_lambda(net, Rng(spec.seed, PROBE_STREAM + step), spec.lyap_d0, spec.lyap_warmup, spec.lyap_window)
    o = np.concatenate(net.o)
    applied = sum(int((st.applied > 0).sum()) for st in net.sal_states())
    return MetricsRow(
        run, step, max_abs_o=float(np.max(np.abs(o))), mean_abs_o=float(np.mean(np.abs(o))),
        w_sample=_weight_sample(net), rms_sens=float(np.sqrt(np.mean(s * s))),
        log_sens=tuple(per_layer), log_sens_total=total, lam=probe.lam, sal_applied=applied,
    )


def _sal_step(net: NetworkState, prev_o: list, cfg: SalConfig) -> None:
    """SAL on every recurrent layer, using the input each layer consumed this step."""
    if len(net.layers) == 1:
        L = net.layers[0]
        sal_layer_step(L.W, L.mask, None, prev_o[0], net.o[0], L.sal, cfg)
        return
    L1, L2 = net.layers
    sal_layer_step(L2.W, L2.mask, None, prev_o[0], net.o[1], L2.sal, cfg)
    x1 = prev_o[1] if net.synchronous else net.o[1]
    sal_layer_step(L1.W, L1.mask, None, x1, net.o[0], L1.sal, cfg)


def run_chaos(spec: ExperimentSpec, net: NetworkState, run: int = 0):
    """SAL-only evolution with periodic perturbations; yields a row every ``probe_every`` steps.

    A fresh perturbation direction is drawn at each injection; injections
    happen at steps 1, 1 + interval, 1 + 2 * interval, ...
    """
    spec = spec.resolved()
    rng = Rng(spec.seed, run)
    cfg = _chaos_sal_config(spec)
    n_pert = net.u[0].shape[0]
    for t in range(spec.steps + 1):
        if t % spec.probe_every == 0:
            yield _chaos_row(net, spec, run, t)
        if t == spec.steps:
            break
        step = t + 1
        pert = None
        if (step - 1) % spec.perturb_interval == 0:
            pert = random_unit_vector(rng, n_pert, spec.perturb_size)
        prev = [o.copy() for o in net.o]
        flat_step(net, pert)
        _sal_step(net, prev, cfg)


def run_chaos_flat(spec: ExperimentSpec, run: int = 0):
    spec = spec.resolved()
    net = init_network(FlatRnnSpec(n=spec.neurons, rate=spec.rate, init=spec.init_chaos), Rng(spec.seed, run))
    return run_chaos(spec, net, run)


def run_chaos_two_layer(spec: ExperimentSpec, stop_at_target: bool | None = None, run: int = 0):
    spec = spec.resolved()
    if stop_at_target is not None:
        spec = replace(spec, stop_at_target=stop_at_target)
    net_spec = TwoLayerRnnSpec(
        n1=spec.n1, n2=spec.n2, rate_1_from_2=spec.rate_1_from_2, rate_2_from_1=spec.rate_2_from_1,
        init=spec.init_2layer, synchronous=spec.synchronous,
    )
    net = init_network(net_spec, Rng(spec.seed, run))
    return run_chaos(spec, net, run)


# ---------------------------------------------------------------- sequential parity


@dataclass
class RunSummary:
    run: int
    seed: int
    case: str
    radius: float
    success: bool
    epochs_used: int
    diverged: bool
    final_error: float


@dataclass
class ParityResult:
    case: str
    radius: float
    successes: int
    runs: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.successes / len(self.runs) if self.runs else 0.0


def train_config_for(spec: ExperimentSpec, case: Case, radius: float | None = None) -> TrainConfig:
    squash = spec.tanh_bp and case is not Case.A2
    return TrainConfig.for_case(
        case,
        sal_kw={"eta_sal": spec.eta_sal, "beta": spec.beta},
        epochs=spec.epochs,
        success_threshold=spec.success_threshold,
        spectral_radius=radius,
        tanh_in_backprop=squash,
        tanh_at_output=squash,
    )


def _epoch_rows(run: int, probes) -> list[MetricsRow]:
    rows = []
    by_epoch: dict[int, list] = {}
    for rec in probes:
        by_epoch.setdefault(rec.epoch, []).append(rec)
    for epoch in sorted(by_epoch):
        recs = by_epoch[epoch]
        errs = np.array([r.error for r in recs])
        steps = sorted(recs[0].delta_rms)
        delta = tuple(float(np.sqrt(np.mean([r.delta_rms[t] ** 2 for r in recs]))) for t in steps)
        rows.append(MetricsRow(
            run, epoch,
            max_abs_o=float(np.max(np.abs([r.output for r in recs]))),
            rms_sens=float(np.mean([r.s_mean for r in recs])),
            sens_std=float(np.mean([r.s_std for r in recs])),
            error=float(np.sqrt(np.mean(errs ** 2))),
            delta_rms=delta,
            sal_applied=int(max(r.sal_neurons for r in recs)),
            flags="diverged" if not np.isfinite(errs).all() else "",
        ))
    return rows


def run_rnn_parity(spec: ExperimentSpec, case: str | Case | None = None, radius: float | None = None,
                   traces: bool = True) -> ParityResult:
    """``spec.runs`` independent Elman runs of one ablation case."""
    spec = spec.resolved()
    case = Case.parse(case or spec.case) if not isinstance(case, Case) else case
    if case is Case.G and radius is None:
        radius = spec.spectral_radius if spec.spectral_radius is not None else 1.38
    cfg = train_config_for(spec, case, radius if case is Case.G else None)
    out = ParityResult(case.value, radius if radius is not None else math.nan, 0)
    for run in range(spec.runs):
        net = init_network(ElmanSpec(), Rng(spec.seed, run))
        res = run_training(net, cfg, record_probes=traces)
        out.successes += int(res.success)
        final = res.error_trace[-1] if res.error_trace else math.nan
        out.runs.append(RunSummary(run, spec.seed, case.value, out.radius, res.success,
                                   res.epochs_used, res.diverged, final))
        if traces:
            out.rows.extend(_epoch_rows(run, res.probes))
    return out


def scan_case_g(spec: ExperimentSpec, traces: bool = False) -> list[ParityResult]:
    """Case G over a grid of spectral radii for the feedback matrix."""
    spec = spec.resolved()
    if spec.spectral_radius is not None:
        return [run_rnn_parity(spec, Case.G, spec.spectral_radius, traces)]
    return [run_rnn_parity(spec, Case.G, r, traces) for r in _radii(spec.radius_lo, spec.radius_hi, spec.radius_step)]


# ---------------------------------------------------------------- deep feedforward nets


@dataclass
class DfnnRun:
    run: int
    layers: int
    init_scale: float
    sal: bool
    final_error: float
    diverged: bool
    success: bool
    delta_bottom: float
    delta_top: float
    trace: list = field(default_factory=list)
    net: NetworkState | None = None


def dfnn_config_for(spec: ExperimentSpec, layers: int) -> TrainConfig:
    cfg = TrainConfig.for_dfnn(layers, sal=spec.sal, tanh_bp=spec.tanh_bp,
                               epochs=spec.dfnn_epochs, dfnn_success_rms=spec.dfnn_success_rms)
    return replace(cfg, sal=replace(cfg.sal, eta_sal=spec.eta_sal, beta=spec.beta))


def train_dfnn(spec: ExperimentSpec, layers: int, init_scale: float, run: int, keep_net: bool = False) -> DfnnRun:
    spec = spec.resolved()
    rng = Rng(spec.seed, run)
    net = init_network(DfnnSpec(layers=layers, init_scale=init_scale), rng)
    res = run_training(net, dfnn_config_for(spec, layers), rng)
    pre = res.pre_delta
    return DfnnRun(run, layers, init_scale, spec.sal, res.final_error, res.diverged, res.success,
                   float(pre[0]), float(pre[-1]), res.error_trace, net if keep_net else None)


def run_dfnn(spec: ExperimentSpec, keep_nets: bool = False) -> list[DfnnRun]:
    """Sweep depth and/or initial hidden weight scale; ``spec.runs`` nets per configuration."""
    spec = spec.resolved()
    depths = spec.depths or (spec.layers,)
    scales = spec.init_scales or (spec.init_scale,)
    return [train_dfnn(spec, L, a, run, keep_nets) for L in depths for a in scales for run in range(spec.runs)]


def summarize_dfnn(runs: list[DfnnRun]) -> list[dict]:
    """Mean, std and median of final error per (depth, scale, sal) configuration."""
    groups: dict[tuple, list[DfnnRun]] = {}
    for r in runs:
        groups.setdefault((r.layers, r.init_scale, r.sal), []).append(r)
    out = []
    for (L, a, sal), rs in groups.items():
        e = np.array([r.final_error for r in rs])
        ok = e[np.isfinite(e)]
        out.append({
            "layers": L, "init_scale": a, "sal": sal, "runs": len(rs),
            "successes": sum(r.success for r in rs), "diverged": sum(r.diverged for r in rs),
            "mean_error": float(ok.mean()) if ok.size else math.nan,
            "std_error": float(ok.std()) if ok.size else math.nan,
            "median_error": float(np.median(e)) if ok.size == e.size else math.nan,
        })
    return out


def dfnn_delta_sweep(spec: ExperimentSpec, scales=None) -> list[dict]:
    """Pre-learning error-signal RMS at the bottom and top hidden layers versus init scale."""
    spec = spec.resolved()
    scales = scales or spec.init_scales or tuple(round(0.1 * k, 10) for k in range(1, 11))
    cfg = dfnn_config_for(spec, spec.layers)
    rows = []
    for a in scales:
        for run in range(spec.runs):
            net = init_network(DfnnSpec(layers=spec.layers, init_scale=a), Rng(spec.seed, run))
            d = dfnn_delta_probe(net, cfg)
            rows.append({"layers": spec.layers, "init_scale": a, "run": run,
                         "delta_bottom": float(d[0]), "delta_top": float(d[-1])})
    return rows


# ---------------------------------------------------------------- output analysis


@dataclass
class OutputAnalysis:
    counts: np.ndarray
    edges: np.ndarray
    band_fraction: float
    outputs: np.ndarray
    pca: dict = field(default_factory=dict)  # layer index -> (points (N, 2), fractions, labels)


def band_labels(y: np.ndarray, band=BAND) -> np.ndarray:
    """+1 / -1 for outputs in the positive / negative band, 0 elsewhere."""
    a = np.abs(y)
    inside = (a >= band[0]) & (a <= band[1])
    return np.where(inside, np.sign(y), 0).astype(np.int64)


def default_pca_layers(hidden_layers: int) -> tuple:
    """First, one-third, two-thirds and last hidden layer (bottom = 0)."""
    picks = {0, hidden_layers // 3, (2 * hidden_layers) // 3, hidden_layers - 1}
    return tuple(sorted(picks))


def analyze_outputs(nets: list[NetworkState], probe_inputs: np.ndarray, bins: int = 20,
                    pca_layers=()) -> OutputAnalysis:
    """Histogram of outputs over all nets and probe inputs, PCA of hidden activations of the first net."""
    ys = []
    pca = {}
    for i, net in enumerate(nets):
        keep = pca_layers if i == 0 else ()
        y, hidden = dfnn_outputs(net, probe_inputs, keep)
        ys.append(y)
        for k, layer in enumerate(keep):
            pts, frac, _ = pca_top2(hidden[k])
            pca[int(layer)] = (pts, frac, band_labels(y))
    y = np.concatenate(ys)
    counts, edges = np.histogram(y, bins=bins, range=(-1.0, 1.0))
    frac = float(np.mean(band_labels(y) != 0))
    return OutputAnalysis(counts, edges, frac, y, pca)


def run_analyze(spec: ExperimentSpec, trained: dict | None = None) -> dict[int, OutputAnalysis]:
    """Train ``spec.nets`` DFNNs per depth (unless given) and analyze their outputs on random inputs."""
    spec = spec.resolved()
    probe = random_probe_inputs(Rng(spec.seed, PROBE_STREAM), spec.probe_inputs)
    out = {}
    for L in spec.analyze_depths:
        if trained and L in trained:
            nets = trained[L]
        else:
            nets = [train_dfnn(spec, L, spec.init_scale, run, keep_net=True).net for run in range(spec.nets)]
        layers = spec.pca_layers or default_pca_layers(L - 2)
        out[L] = analyze_outputs(nets, probe, spec.bins, tuple(k for k in layers if k < L - 2))
    return out
