import math

import numpy as np
import pytest

from salnet import harness
from salnet.harness import ExperimentSpec
from salnet.networks import DfnnSpec, init_network
from salnet.numerics import Rng


def test_chaos_flat_rows_every_probe_interval():
    spec = ExperimentSpec(kind="chaos-flat", neurons=20, steps=500, lyap_window=100)
    rows = list(harness.run_chaos_flat(spec))
    assert [r.step for r in rows] == [0, 100, 200, 300, 400, 500]
    assert all(len(harness.row_values("chaos-flat", r)) == len(harness.SCHEMAS["chaos-flat"]) for r in rows)
    # outputs stay near zero early on, weights grow
    assert rows[-1].max_abs_o < 0.01
    assert rows[-1].log_sens_total > rows[0].log_sens_total


def test_chaos_weights_grow_at_constant_rate_while_outputs_vanish():
    spec = ExperimentSpec(kind="chaos-flat", neurons=30, steps=3000, probe_every=1000, lyap_window=10, lyap_warmup=1)
    rows = list(harness.run_chaos_flat(spec))
    rms = [math.exp(r.log_sens_total) for r in rows]
    steps = np.diff(rms)
    # with o ~ 0 every weight vector grows by eta per step
    assert steps == pytest.approx([1000 * 0.00002] * 3, rel=0.02)


def test_chaos_two_layer_has_per_layer_columns():
    spec = ExperimentSpec(kind="chaos-2layer", n1=20, n2=5, steps=200, lyap_window=50)
    rows = list(harness.run_chaos_two_layer(spec, stop_at_target=True))
    assert len(rows) == 3 and len(rows[0].log_sens) == 2
    assert rows[0].log_sens_total == pytest.approx(sum(rows[0].log_sens))


def test_chaos_is_reproducible():
    spec = ExperimentSpec(kind="chaos-flat", neurons=10, steps=300, lyap_window=50)
    a = [harness.row_values("chaos-flat", r) for r in harness.run_chaos_flat(spec)]
    b = [harness.row_values("chaos-flat", r) for r in harness.run_chaos_flat(spec)]
    assert repr(a) == repr(b)


def test_rnn_parity_small_run():
    spec = ExperimentSpec(kind="rnn-parity", runs=2, epochs=2, case="F")
    res = harness.run_rnn_parity(spec)
    assert res.successes == 0 and len(res.runs) == 2
    assert [r.step for r in res.rows if r.run == 0] == [0, 1, 2]
    assert res.rows[0].delta_rms[0] < 1e-30


def test_rnn_parity_single_run_replays_in_isolation():
    spec = ExperimentSpec(kind="rnn-parity", runs=2, epochs=3, case="A")
    both = harness.run_rnn_parity(spec)
    from salnet.learning import run_training
    from salnet.networks import ElmanSpec
    net = init_network(ElmanSpec(), Rng(spec.seed, 1))
    alone = run_training(net, harness.train_config_for(spec.resolved(), harness.Case.A))
    assert alone.error_trace[-1] == both.runs[1].final_error


def test_case_g_scan_grid():
    spec = ExperimentSpec(kind="rnn-parity", case="G", runs=1, epochs=1, radius_lo=1.0, radius_hi=1.2)
    res = harness.scan_case_g(spec)
    assert [r.radius for r in res] == [1.0, 1.1, 1.2]
    fixed = harness.scan_case_g(ExperimentSpec(kind="rnn-parity", case="G", runs=1, epochs=1, spectral_radius=1.38))
    assert [r.radius for r in fixed] == [1.38]


def test_dfnn_run_and_summary():
    spec = ExperimentSpec(kind="dfnn-parity", runs=2, dfnn_epochs=3, depths=(3, 4))
    runs = harness.run_dfnn(spec)
    assert [(r.layers, r.run) for r in runs] == [(3, 0), (3, 1), (4, 0), (4, 1)]
    summ = harness.summarize_dfnn(runs)
    assert len(summ) == 2 and summ[0]["runs"] == 2
    assert all(math.isfinite(s["mean_error"]) for s in summ)


def test_delta_sweep_vanishes_for_small_scale():
    rows = harness.dfnn_delta_sweep(ExperimentSpec(kind="dfnn-probe", layers=30, runs=1), scales=(0.1,))
    assert rows[0]["delta_bottom"] < 1e-10 < rows[0]["delta_top"]


def test_band_labels():
    y = np.array([0.8, -0.8, 0.5, 0.75, -0.85, 0.9])
    assert harness.band_labels(y).tolist() == [1, -1, 0, 1, -1, 0]


def test_default_pca_layers_for_300_layers():
    assert harness.default_pca_layers(298) == (0, 99, 198, 297)


def test_analyze_histogram_accounting():
    nets = [init_network(DfnnSpec(layers=5, init_scale=0.5), Rng(0, k)) for k in range(3)]
    X = np.random.default_rng(0).uniform(-1, 1, (100, 8))
    a = harness.analyze_outputs(nets, X, bins=20, pca_layers=(0, 2))
    assert a.counts.sum() == 300 and len(a.edges) == 21
    assert set(a.pca) == {0, 2}
    pts, frac, labels = a.pca[0]
    assert pts.shape == (100, 2) and labels.shape == (100,)
    assert 0 < frac[1] <= frac[0] <= 1


def test_untrained_outputs_are_not_concentrated():
    nets = [init_network(DfnnSpec(layers=3, init_io=1.0), Rng(1, k)) for k in range(5)]
    X = np.random.default_rng(1).uniform(-1, 1, (1000, 8))
    assert harness.analyze_outputs(nets, X).band_fraction < 0.2
