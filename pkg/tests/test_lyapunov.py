import math

import numpy as np
import pytest

from salnet.checks import linear_lambda
from salnet.lyapunov import LOG_FLOOR, estimate_lambda, log_sensitivity, probe_lambda, sensitivities
from salnet.networks import DfnnSpec, ElmanSpec, FlatRnnSpec, TwoLayerRnnSpec, init_network
from salnet.numerics import Rng


@pytest.mark.parametrize("rho", [0.5, 1.0, 1.5])
def test_linear_network_lambda_is_log_radius(rho):
    assert linear_lambda(rho, Rng(7)) == pytest.approx(math.log(rho), abs=0.05)


def test_probe_does_not_touch_network():
    net = init_network(FlatRnnSpec(n=20, init=0.3), Rng(0))
    net.o[0] = np.tanh(Rng(1).normal(20))
    net.u[0] = np.arctanh(net.o[0])
    before = net.copy()
    probe_lambda(net, Rng(2), warmup=10, window=50)
    for k in net.params:
        assert np.array_equal(net.params[k], before.params[k])
    assert np.array_equal(net.u[0], before.u[0]) and np.array_equal(net.o[0], before.o[0])
    assert net.t == before.t


def test_zero_network_hits_floor():
    net = init_network(FlatRnnSpec(n=5, init=0.0), Rng(0))
    probe = probe_lambda(net, Rng(1), warmup=2, window=10)
    assert probe.lam == LOG_FLOOR
    assert probe.underflows == 12


def test_lambda_independent_of_perturbation_direction():
    net = init_network(FlatRnnSpec(n=50, init=0.5), Rng(3))
    net.o[0] = np.tanh(Rng(4).normal(50))
    net.u[0] = np.arctanh(net.o[0])
    lams = [estimate_lambda(net, Rng(10 + k)) for k in range(3)]
    assert max(lams) - min(lams) <= 0.05


def test_flat_initial_log_sensitivity():
    # ln(0.01 * sqrt(100 / 3)) for weights uniform in [-0.01, 0.01]
    expected = math.log(0.01 * math.sqrt(100 / 3))
    _, total = log_sensitivity(init_network(FlatRnnSpec(), Rng(0)))
    assert total == pytest.approx(expected, abs=0.03)


def test_two_layer_initial_log_sensitivity_per_layer():
    per_layer, total = log_sensitivity(init_network(TwoLayerRnnSpec(), Rng(0)))
    assert per_layer[0] == pytest.approx(math.log(0.03 * math.sqrt(10 / 3)), abs=0.05)
    assert per_layer[1] == pytest.approx(math.log(0.03 * math.sqrt(1000 / 3)), abs=0.05)
    assert total == pytest.approx(sum(per_layer))


def test_sensitivity_groups_per_topology():
    assert len(sensitivities(init_network(ElmanSpec(), Rng(0)))) == 1
    assert len(sensitivities(init_network(DfnnSpec(layers=6), Rng(0)))) == 4


def test_linear_regime_lambda_tracks_log_sensitivity():
    net = init_network(FlatRnnSpec(), Rng(5))
    _, ls = log_sensitivity(net)
    assert estimate_lambda(net, Rng(6)) == pytest.approx(ls, abs=0.15)
