import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salnet.numerics import (
    DegenerateError,
    Rng,
    pca_top2,
    random_unit_vector,
    scale_to_spectral_radius,
    spectral_radius,
    uniform,
)


def test_rng_same_key_same_stream():
    a, b = Rng(5, 3), Rng(5, 3)
    assert np.array_equal(a.uniform(-1, 1, 50), b.uniform(-1, 1, 50))


def test_rng_runs_are_independent_streams():
    assert not np.array_equal(Rng(5, 0).uniform(size=20), Rng(5, 1).uniform(size=20))
    assert not np.array_equal(Rng(5).uniform(size=20), Rng(5, 0).uniform(size=20))


def test_rng_child_matches_direct_key():
    assert np.array_equal(Rng(9).child(4).normal(10), Rng(9, 4).normal(10))


def test_rng_rejects_negative_seed():
    with pytest.raises(ValueError):
        Rng(-1)


def test_uniform_range_checked():
    r = Rng(0)
    with pytest.raises(ValueError):
        r.uniform(1.0, 0.0)
    v = uniform(r, -0.01, 0.01)
    assert -0.01 <= v < 0.01


@given(st.integers(1, 300), st.floats(1e-6, 10.0), st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_random_unit_vector_norm(dim, norm, seed):
    v = random_unit_vector(Rng(seed), dim, norm)
    assert v.shape == (dim,)
    assert np.linalg.norm(v) == pytest.approx(norm, rel=1e-12)


def test_random_unit_vector_degenerate():
    with pytest.raises(DegenerateError):
        random_unit_vector(Rng(0), 0)
    with pytest.raises(DegenerateError):
        random_unit_vector(Rng(0), 3, 0.0)


@given(st.integers(2, 30), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_spectral_radius_matches_eigvals(n, seed):
    W = Rng(seed).uniform(-1, 1, (n, n))
    expected = np.max(np.abs(np.linalg.eigvals(W)))
    assert spectral_radius(W, max_iters=20000) == pytest.approx(expected, rel=2e-3)


def test_spectral_radius_of_zero_matrix():
    assert spectral_radius(np.zeros((4, 4))) == 0.0


def test_spectral_radius_rotation():
    c, s = np.cos(0.3), np.sin(0.3)
    W = 1.7 * np.array([[c, -s], [s, c]])
    assert spectral_radius(W) == pytest.approx(1.7, rel=1e-6)


def test_spectral_radius_rejects_non_square():
    with pytest.raises(ValueError):
        spectral_radius(np.zeros((2, 3)))


@pytest.mark.parametrize("target", [0.5, 1.0, 1.38])
def test_scale_to_spectral_radius(target):
    W = Rng(2).uniform(-0.1, 0.1, (20, 20))
    scaled = scale_to_spectral_radius(W, target)
    assert np.max(np.abs(np.linalg.eigvals(scaled))) == pytest.approx(target, rel=1e-3)


def test_scale_zero_matrix_is_degenerate():
    with pytest.raises(DegenerateError):
        scale_to_spectral_radius(np.zeros((3, 3)), 1.0)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_pca_matches_eigh(seed):
    rng = Rng(seed)
    pts = rng.normal((200, 5)) * np.array([5.0, 3.0, 1.0, 0.5, 0.1])
    proj, frac, ev = pca_top2(pts)
    C = np.cov(pts, rowvar=False)
    w, V = np.linalg.eigh(C)
    assert ev == pytest.approx(w[::-1][:2], rel=1e-6)
    assert frac == pytest.approx(w[::-1][:2] / w.sum(), rel=1e-6)
    centered = pts - pts.mean(axis=0)
    for k in range(2):
        ref = centered @ V[:, -1 - k]
        assert min(np.max(np.abs(proj[:, k] - ref)), np.max(np.abs(proj[:, k] + ref))) < 1e-5


def test_pca_degenerate():
    with pytest.raises(DegenerateError):
        pca_top2(np.ones((10, 3)))
