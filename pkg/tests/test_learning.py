import math

import numpy as np
import pytest

from salnet.checks import bp_gradient_check, bptt_gradient_check
from salnet.learning import (
    FORWARD,
    LEARN,
    PROBE,
    Case,
    TrainConfig,
    bp_pattern,
    bptt_pattern,
    dfnn_delta_probe,
    run_training,
    squash_delta,
)
from salnet.networks import DfnnSpec, ElmanSpec, FlatRnnSpec, elman_output, elman_step, init_network
from salnet.numerics import Rng
from salnet.sal import SalCriterion, SalMode, SalVariant
from salnet.tasks import parity3_patterns


def test_squash_delta():
    assert squash_delta(3.0, 0.5) == pytest.approx(math.tanh(1.5))
    assert squash_delta(3.0, 0.5, enabled=False) == 1.5
    assert abs(squash_delta(1e6, 1.0)) <= 1.0


def test_bptt_matches_finite_differences():
    assert bptt_gradient_check(Rng(1), trials=10) < 1e-5


def test_bp_matches_finite_differences():
    assert bp_gradient_check(Rng(2), trials=10) < 1e-5


@pytest.mark.parametrize("case,mode,variant,criterion,squash", [
    ("A", SalMode.CONTINUOUS, SalVariant.FULL, SalCriterion.NONLINEAR, True),
    ("A'", SalMode.CONTINUOUS, SalVariant.FULL, SalCriterion.NONLINEAR, False),
    ("B", SalMode.ONCE, SalVariant.FULL, SalCriterion.NONLINEAR, True),
    ("C", SalMode.CONTINUOUS, SalVariant.FULL, SalCriterion.LINEAR, True),
    ("D", SalMode.CONTINUOUS, SalVariant.LINEAR, SalCriterion.NONLINEAR, True),
    ("E", SalMode.CONTINUOUS, SalVariant.LINEAR, SalCriterion.LINEAR, True),
    ("F", SalMode.OFF, SalVariant.FULL, SalCriterion.NONLINEAR, True),
])
def test_case_flags(case, mode, variant, criterion, squash):
    cfg = TrainConfig.for_case(case)
    assert cfg.sal.mode is mode
    if mode is not SalMode.OFF:
        assert cfg.sal.variant is variant and cfg.sal.criterion is criterion
    assert cfg.tanh_in_backprop is squash
    assert cfg.sal.eta_sal == 0.0002 and cfg.sal.beta == 0.999


def test_case_g_defaults_to_tuned_radius():
    cfg = TrainConfig.for_case(Case.G)
    assert not cfg.sal_on and cfg.spectral_radius == 1.38


def test_elman_kernel_forward_matches_reference():
    net = init_network(ElmanSpec(init_in=0.5), Rng(3))
    ref = net.copy()
    pat = parity3_patterns()[5]
    x = pat.inputs()
    _, err, _ = bptt_pattern(net, x, pat.target, TrainConfig.for_case("F"), mode=FORWARD)
    for x_t in x:
        elman_step(ref, x_t)
    y = elman_output(ref)[0]
    assert err == pytest.approx(pat.target - y, abs=1e-12)
    assert net.o[0] == pytest.approx(ref.o[0], abs=1e-12)


def test_probe_mode_changes_nothing():
    net = init_network(ElmanSpec(), Rng(4))
    before = net.copy()
    pat = parity3_patterns()[1]
    _, _, rec = bptt_pattern(net, pat.inputs(), pat.target, TrainConfig.for_case("A"), mode=PROBE)
    for k in net.params:
        assert np.array_equal(net.params[k], before.params[k]), k
    assert set(rec.delta_rms) == {0, 100, 200, 300}


def test_learning_changes_weights_and_sal_only_when_on():
    pat = parity3_patterns()[2]
    for case, sal_expected in (("A", True), ("F", False)):
        net = init_network(ElmanSpec(), Rng(5))
        before = net.copy()
        _, _, rec = bptt_pattern(net, pat.inputs(), pat.target, TrainConfig.for_case(case), mode=LEARN)
        assert not np.array_equal(net.params["W_out"], before.params["W_out"])
        assert bool(net.params["sal_applied"].sum() > 0) is sal_expected
        assert bool(rec.sal_neurons > 0) is sal_expected


def test_sal_skips_first_step():
    # one presentation of 301 steps: SAL can act on at most 300 of them
    net = init_network(ElmanSpec(), Rng(6))
    pat = parity3_patterns()[0]
    bptt_pattern(net, pat.inputs(), pat.target, TrainConfig.for_case("A"), mode=LEARN)
    assert net.params["sal_n"].max() == 300


def test_pre_learning_error_signal_vanishes_without_sal():
    net = init_network(ElmanSpec(), Rng(7))
    res = run_training(net, TrainConfig.for_case("F", epochs=1))
    first = res.probes[0].delta_rms
    assert first[0] < 1e-30 < 1e-3 < first[300]


def test_training_stops_at_success():
    net = init_network(ElmanSpec(), Rng(1, 0))
    res = run_training(net, TrainConfig.for_case("A"), record_probes=False)
    assert res.success and 0 < res.epochs_used <= 1000
    assert len(res.error_trace) == res.epochs_used + 1


def test_dfnn_pattern_and_probe():
    net = init_network(DfnnSpec(layers=6), Rng(8))
    cfg = TrainConfig.for_dfnn(6)
    before = net.copy()
    d = dfnn_delta_probe(net, cfg)
    assert d.shape == (4,) and np.all(d > 0)
    assert np.array_equal(net.params["W_hidden"], before.params["W_hidden"])
    x = np.ones(8)
    _, err, drms = bp_pattern(net, x, 0.8, cfg)
    assert drms.shape == (4,) and math.isfinite(err)
    assert not np.array_equal(net.params["W_hidden"], before.params["W_hidden"])


def test_dfnn_training_reduces_error():
    net = init_network(DfnnSpec(layers=3), Rng(9))
    res = run_training(net, TrainConfig.for_dfnn(3, epochs=100), Rng(9, 1))
    assert not res.diverged
    assert res.error_trace[-1] < res.error_trace[0]
    assert math.isfinite(res.final_error)


def test_topology_checks():
    flat = init_network(FlatRnnSpec(n=3), Rng(0))
    with pytest.raises(ValueError):
        bptt_pattern(flat, np.zeros((2, 3)), 0.0, TrainConfig())
    with pytest.raises(ValueError):
        bp_pattern(flat, np.zeros(8), 0.0, TrainConfig.for_dfnn(3))
    with pytest.raises(ValueError):
        run_training(flat, TrainConfig())
    with pytest.raises(ValueError):
        run_training(init_network(DfnnSpec(layers=3), Rng(0)), TrainConfig.for_dfnn(3))
