"""Command-line entry point: ``salnet <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 experiment divergence, 3 I/O error.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import harness, io
from .checks import run_all
from .config import ConfigError, load_config
from .harness import ExperimentSpec
from .learning import Case

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (default 1)")
    common.add_argument("--runs", type=int, help="independent runs per configuration")
    common.add_argument("--paper-scale", action="store_true", default=None, help="use full run counts and lengths")
    common.add_argument("--out", type=Path, help=f"output directory (default ${io.OUT_ENV} or ./salnet-out)")
    common.add_argument("--config", type=Path, help="key = value configuration file")

    p = _Parser(prog="salnet", description="SAL experiments: chaos generation, parity learning, deep nets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    chaos = _Parser(add_help=False)
    chaos.add_argument("--steps", type=int, help="SAL steps")
    chaos.add_argument("--eta-sal", type=float, dest="eta_sal")
    chaos.add_argument("--stop-at-target", action="store_true", default=None,
                       help="stop SAL per neuron once its averaged sensitivity reaches the target")

    s = sub.add_parser("chaos-flat", parents=[common, chaos], help="SAL on a flat RNN")
    s.add_argument("--neurons", type=int)
    s.add_argument("--rate", type=float, help="connection rate in [0, 1]")

    s = sub.add_parser("chaos-2layer", parents=[common, chaos], help="SAL on a two-layer RNN")
    s.add_argument("--n1", type=int)
    s.add_argument("--n2", type=int)
    s.add_argument("--synchronous", action="store_true", default=None,
                   help="update both layers from the previous step's outputs")

    s = sub.add_parser("rnn-parity", parents=[common], help="3-bit parity with a 300-step lag (Elman RNN)")
    s.add_argument("--case", choices=[c.value for c in Case], help="ablation case")
    s.add_argument("--radius", type=float, dest="spectral_radius", help="case G: fixed spectral radius instead of a scan")
    s.add_argument("--epochs", type=int)
    s.add_argument("--no-tanh-bp", dest="tanh_bp", action="store_false", default=None)

    dfnn = _Parser(add_help=False)
    dfnn.add_argument("--layers", type=int, help="total layers including input and output")
    dfnn.add_argument("--init-scale", type=float, help="hidden -> hidden initial weight range")
    dfnn.add_argument("--depths", type=_int_list, help="sweep over these depths")
    dfnn.add_argument("--init-scales", type=_float_list, help="sweep over these init scales")
    dfnn.add_argument("--no-sal", dest="sal", action="store_false", default=None)
    dfnn.add_argument("--no-tanh-bp", dest="tanh_bp", action="store_false", default=None)
    dfnn.add_argument("--epochs", type=int, dest="dfnn_epochs")

    sub.add_parser("dfnn-parity", parents=[common, dfnn], help="noisy 8-bit parity with a deep feedforward net")
    sub.add_parser("dfnn-probe", parents=[common, dfnn], help="pre-learning error signal versus init scale")
    s = sub.add_parser("analyze", parents=[common, dfnn], help="output histogram and PCA of trained deep nets")
    s.add_argument("--analyze-depths", type=_int_list)
    s.add_argument("--nets", type=int)

    s = sub.add_parser("selftest", help="finite-difference and Monte-Carlo checks")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, help="also write selftest.csv to this directory")
    return p


_NOT_SPEC = {"command", "config", "out"}


def spec_from_args(args) -> ExperimentSpec:
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_SPEC and v is not None}
    overrides["kind"] = args.command
    if args.config is not None:
        return load_config(args.config, **overrides)
    return ExperimentSpec(**overrides)


# ---------------------------------------------------------------- subcommands


def _chaos(spec: ExperimentSpec, out: Path) -> tuple[list[Path], bool]:
    kind = spec.kind
    rows = []
    for run in range(spec.runs):
        gen = harness.run_chaos_flat(spec, run) if kind == "chaos-flat" else harness.run_chaos_two_layer(spec, run=run)
        rows.extend(gen)
    files = [io.write_csv(out / "metrics.csv", harness.SCHEMAS[kind],
                          (harness.row_values(kind, r) for r in rows))]
    series = {}
    for run in range(spec.runs):
        rr = [r for r in rows if r.run == run]
        series[f"run {run}"] = ([r.lam for r in rr], [r.log_sens_total for r in rr])
    files.append(io.write_svg(out / "lambda_vs_logsens.svg", series, "log-sensitivity against λ",
                              "maximum Lyapunov exponent λ", "log-sensitivity"))
    diverged = any(not math.isfinite(r.log_sens_total) for r in rows)
    return files, diverged


def _rnn_parity(spec: ExperimentSpec, out: Path) -> tuple[list[Path], bool]:
    case = Case.parse(spec.case)
    results = harness.scan_case_g(spec, traces=True) if case is Case.G else [harness.run_rnn_parity(spec, case)]
    runs = [r for res in results for r in res.runs]
    files = [
        io.write_csv(out / "runs.csv",
                     ["case", "radius", "run", "seed", "success", "epochs_used", "diverged", "final_error"],
                     ([r.case, r.radius, r.run, r.seed, r.success, r.epochs_used, r.diverged, r.final_error] for r in runs)),
        io.write_csv(out / "success.csv", ["case", "radius", "successes", "runs"],
                     ([res.case, res.radius, res.successes, len(res.runs)] for res in results)),
    ]
    if len(results) == 1:
        rows = results[0].rows
        files.append(io.write_csv(out / "trace.csv", harness.SCHEMAS["rnn-parity"],
                                  (harness.row_values("rnn-parity", r) for r in rows)))
        series = {}
        for run in range(len(results[0].runs)):
            rr = [r for r in rows if r.run == run]
            series[f"run {run}"] = ([r.step for r in rr], [r.error for r in rr])
        files.append(io.write_svg(out / "error.svg", series, f"case {case.value}", "epoch", "RMS error"))
    else:
        files.append(io.write_svg(out / "success_vs_radius.svg",
                                  {"G": ([r.radius for r in results], [r.successes for r in results])},
                                  "case G", "spectral radius", "successes"))
    diverged = bool(runs) and all(r.diverged for r in runs)
    return files, diverged


def _dfnn_parity(spec: ExperimentSpec, out: Path) -> tuple[list[Path], bool]:
    runs = harness.run_dfnn(spec)
    files = [
        io.write_csv(out / "runs.csv",
                     ["layers", "init_scale", "sal", "run", "final_error", "diverged", "success",
                      "delta_bottom_pre", "delta_top_pre"],
                     ([r.layers, r.init_scale, r.sal, r.run, r.final_error, r.diverged, r.success,
                       r.delta_bottom, r.delta_top] for r in runs)),
        io.write_dict_csv(out / "summary.csv", harness.summarize_dfnn(runs),
                          ["layers", "init_scale", "sal", "runs", "successes", "diverged",
                           "mean_error", "std_error", "median_error"]),
        io.write_csv(out / "trace.csv", ["layers", "init_scale", "run", "epoch", "error"],
                     ([r.layers, r.init_scale, r.run, e + 1, v] for r in runs for e, v in enumerate(r.trace))),
    ]
    summ = harness.summarize_dfnn(runs)
    if len(summ) > 1:
        depth_sweep = len({s["layers"] for s in summ}) > 1
        key = "layers" if depth_sweep else "init_scale"
        files.append(io.write_svg(out / f"error_vs_{key}.svg",
                                  {"mean error": ([s[key] for s in summ], [s["mean_error"] for s in summ])},
                                  "final error", key, "RMS error"))
    return files, bool(runs) and all(r.diverged for r in runs)


def _dfnn_probe(spec: ExperimentSpec, out: Path) -> tuple[list[Path], bool]:
    rows = harness.dfnn_delta_sweep(spec)
    files = [io.write_dict_csv(out / "delta.csv", rows,
                               ["layers", "init_scale", "run", "delta_bottom", "delta_top"])]
    scales = sorted({r["init_scale"] for r in rows})

    def mean_log(key, a):
        v = [r[key] for r in rows if r["init_scale"] == a]
        return float(np.mean(np.log10(np.maximum(v, 1e-300))))

    files.append(io.write_svg(out / "delta_vs_scale.svg",
                              {"bottom": (scales, [mean_log("delta_bottom", a) for a in scales]),
                               "top": (scales, [mean_log("delta_top", a) for a in scales])},
                              f"{spec.layers} layers, before learning", "initial weight scale",
                              "log10 RMS error signal"))
    return files, False


def _analyze(spec: ExperimentSpec, out: Path) -> tuple[list[Path], bool]:
    res = harness.run_analyze(spec)
    hist, bands, pca = [], [], []
    for L, a in res.items():
        for lo, hi, c in zip(a.edges[:-1], a.edges[1:], a.counts):
            hist.append([L, float(lo), float(hi), int(c)])
        bands.append([L, a.band_fraction, a.outputs.size])
        for layer, (pts, frac, labels) in a.pca.items():
            for i, ((x, y), lab) in enumerate(zip(pts, labels)):
                pca.append([L, layer, i, float(x), float(y), int(lab), float(frac[0]), float(frac[1])])
    files = [
        io.write_csv(out / "histogram.csv", ["layers", "bin_lo", "bin_hi", "count"], hist),
        io.write_csv(out / "band_fraction.csv", ["layers", "fraction", "outputs"], bands),
        io.write_csv(out / "pca.csv", ["layers", "hidden_layer", "point", "pc1", "pc2", "band", "var1", "var2"], pca),
        io.write_svg(out / "histogram.svg",
                     {f"{L} layers": (a.edges, a.counts) for L, a in res.items()},
                     "output histogram on random inputs", "output", "count", kind="bar"),
    ]
    for L, a in res.items():
        for layer, (pts, _, labels) in a.pca.items():
            series = {name: (pts[labels == v, 0], pts[labels == v, 1])
                      for name, v in (("other", 0), ("near -0.8", -1), ("near +0.8", 1))}
            files.append(io.write_svg(out / f"pca_{L}_layer{layer}.svg", series,
                                      f"{L} layers, hidden layer {layer + 1}", "PC1", "PC2", kind="scatter"))
    diverged = any(not np.isfinite(a.outputs).all() for a in res.values())
    return files, diverged


HANDLERS = {
    "chaos-flat": _chaos,
    "chaos-2layer": _chaos,
    "rnn-parity": _rnn_parity,
    "dfnn-parity": _dfnn_parity,
    "dfnn-probe": _dfnn_probe,
    "analyze": _analyze,
}


def _selftest(seed: int, out: Path | None) -> int:
    results = run_all(seed)
    for name, value, passed in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.6g}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        io.write_csv(out / "selftest.csv", ["check", "value", "passed"], results)
    return EXIT_OK if all(p for _, _, p in results) else EXIT_DIVERGED


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "selftest":
            return _selftest(args.seed, args.out)
        spec = spec_from_args(args).resolved()
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError) as exc:
        print(f"salnet: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"salnet: {exc}", file=sys.stderr)
        return EXIT_IO

    out = args.out or io.default_out_dir()
    run_seeds = [[spec.seed, r] for r in range(spec.runs)]
    try:
        manifest = io.Manifest(out, spec.kind, spec.to_dict(), spec.seed, run_seeds)
        manifest.write()
        files, diverged = HANDLERS[spec.kind](spec, out)
        manifest.finish(files, "diverged" if diverged else "ok")
    except OSError as exc:
        print(f"salnet: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in files:
        print(f)
    return EXIT_DIVERGED if diverged else EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
