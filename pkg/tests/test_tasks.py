import csv

import numpy as np
import pytest

from salnet.numerics import Rng
from salnet.tasks import (
    PARITY_TARGET,
    export_patterns_csv,
    noisy_inputs,
    parity3_patterns,
    parity8_clean_inputs,
    parity8_pattern,
    parity8_words,
    parity_target,
    random_probe_inputs,
)


def test_parity_target():
    assert parity_target([1, 0, 0]) == PARITY_TARGET
    assert parity_target([1, 1, 0]) == -PARITY_TARGET
    assert parity_target([0, 0, 0]) == -PARITY_TARGET


def test_parity3_schedule():
    pats = parity3_patterns()
    assert len(pats) == 8
    for p in pats:
        x = p.inputs()
        assert x.shape == (301, 3)
        nz = np.argwhere(x != 0)
        assert nz.tolist() == [[0, 0], [100, 1], [200, 2]]
        assert [x[0, 0], x[100, 1], x[200, 2]] == [1.0 if b else -1.0 for b in p.bits]
        assert p.target == parity_target(p.bits)
    assert sum(p.target > 0 for p in pats) == 4


def test_parity8_clean_set():
    X, d = parity8_clean_inputs()
    assert X.shape == (256, 8) and set(np.unique(X)) == {-1.0, 1.0}
    assert len({tuple(r) for r in parity8_words()}) == 256
    odd = (X > 0).sum(axis=1) % 2 == 1
    assert np.all(d[odd] == 0.8) and np.all(d[~odd] == -0.8)


def test_noise_is_bounded_and_fresh():
    X, _ = parity8_clean_inputs()
    rng = Rng(0)
    a, b = noisy_inputs(X, rng), noisy_inputs(X, rng)
    assert np.max(np.abs(a - X)) <= 0.2
    assert not np.array_equal(a, b)
    assert np.array_equal(noisy_inputs(X, rng, 0.0), X)


def test_parity8_pattern():
    p = parity8_pattern([1, 0, 1, 1, 0, 0, 0, 0], Rng(1))
    assert p.target == 0.8
    assert np.max(np.abs(p.inputs - np.array([1, -1, 1, 1, -1, -1, -1, -1]))) <= 0.2
    with pytest.raises(ValueError):
        parity8_pattern([1, 0])


def test_random_probe_inputs_range():
    X = random_probe_inputs(Rng(2))
    assert X.shape == (1000, 8)
    assert X.min() >= -1.0 and X.max() <= 1.0


def test_export_csv(tmp_path):
    path = tmp_path / "p3.csv"
    export_patterns_csv(path, parity3_patterns())
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["bits", "schedule", "target"]
    assert rows[1] == ["000", "0:0:-1.0;100:1:-1.0;200:2:-1.0", "-0.8"]
    path8 = tmp_path / "p8.csv"
    export_patterns_csv(path8, [parity8_pattern([1] * 8)])
    rows = list(csv.reader(path8.open()))
    assert rows[1][0] == "11111111" and rows[1][-1] == "-0.8"
