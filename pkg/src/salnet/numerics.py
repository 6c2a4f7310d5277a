"""Random numbers, spectral radius estimation and a small PCA.

Every stochastic draw in the package goes through :class:`Rng`, a thin
wrapper around numpy's counter-based Philox generator.  A run's stream is
derived from ``(master_seed, run_index)`` through ``SeedSequence`` so that
independent runs never share state and any single run can be replayed.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "Rng",
    "DegenerateError",
    "uniform",
    "random_unit_vector",
    "spectral_radius",
    "scale_to_spectral_radius",
    "pca_top2",
]


class DegenerateError(ValueError):
    """Raised when an operation has no well-defined answer (zero matrix, zero vector...)."""


class Rng:
    """Seeded Philox stream.

    ``Rng(seed)`` is the master stream; ``Rng(seed, run)`` is the child
    stream for run index ``run``.  Both are pure functions of their key.
    """

    def __init__(self, seed: int = 0, run: int | None = None):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.run = run
        # run streams use the spawn key, which numpy keeps disjoint from plain entropy
        seq = np.random.SeedSequence(self.seed, spawn_key=() if run is None else (int(run),))
        self._gen = np.random.Generator(np.random.Philox(seq))

    def child(self, run: int) -> "Rng":
        return Rng(self.seed, run)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        if lo > hi:
            raise ValueError(f"uniform range is empty: [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def bernoulli(self, p: float, size) -> np.ndarray:
        return self._gen.random(size) < p

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, lo: int, hi: int, size=None):
        return self._gen.integers(lo, hi, size)


def uniform(rng: Rng, lo: float, hi: float) -> float:
    """One draw from [lo, hi)."""
    return float(rng.uniform(lo, hi))


def random_unit_vector(rng: Rng, dim: int, norm: float = 1.0) -> np.ndarray:
    """Isotropic random direction scaled to Euclidean length ``norm``."""
    if dim < 1:
        raise DegenerateError("dim must be >= 1")
    if norm <= 0:
        raise DegenerateError("norm must be > 0")
    while True:
        v = rng.normal(dim)
        length = np.linalg.norm(v)
        if length > 0:
            return v * (norm / length)


def _check_square(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"square matrix required, got shape {W.shape}")
    return W


def spectral_radius(W, max_iters: int = 2000, tol: float = 1e-6, starts: int = 3, seed: int = 0) -> float:
    """Largest eigenvalue modulus from the growth rate of ``W^k v``.

    Plain power iteration does not converge when the dominant eigenvalues
    form a complex pair, but the norm of ``W^k v`` still grows like
    ``rho^k`` up to a bounded oscillating factor.  After a burn-in of half
    the budget, the mean log growth over the remaining iterations is the
    estimate; the maximum over several random starts guards against a start
    vector with a tiny dominant component.
    """
    W = _check_square(W)
    n = W.shape[0]
    if not np.any(W):
        return 0.0
    rng = np.random.default_rng(seed)
    burn = max_iters // 2
    window = max(max_iters - burn, 1)
    best = 0.0
    for _ in range(starts):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        dead = False
        for _ in range(burn):
            v = W @ v
            nv = np.linalg.norm(v)
            if nv == 0.0:
                dead = True
                break
            v /= nv
        if dead:
            continue
        log_growth = 0.0
        prev_est = None
        for k in range(1, window + 1):
            v = W @ v
            nv = np.linalg.norm(v)
            if nv == 0.0:
                dead = True
                break
            log_growth += np.log(nv)
            v /= nv
            # early exit once two checkpoints a doubling apart agree
            if k >= 64 and (k & (k - 1)) == 0:
                est = log_growth / k
                if prev_est is not None and abs(est - prev_est) < tol * 0.1:
                    break
                prev_est = est
        if dead:
            continue
        best = max(best, float(np.exp(log_growth / k)))
    return best


def scale_to_spectral_radius(W, target: float, **kwargs) -> np.ndarray:
    W = _check_square(W)
    rho = spectral_radius(W, **kwargs)
    if rho == 0.0:
        raise DegenerateError("cannot rescale a matrix with zero spectral radius")
    return W * (target / rho)


def _top_eigenpair(C: np.ndarray, max_iters: int, tol: float, rng: np.random.Generator):
    n = C.shape[0]
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ C @ v)
    for _ in range(max_iters):
        w = C @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        w /= nw
        lam_new = float(w @ C @ w)
        converged = np.linalg.norm(C @ w - lam_new * w) <= tol * max(abs(lam_new), 1e-300)
        v, lam = w, lam_new
        if converged:
            break
    return lam, v


def pca_top2(points, max_iters: int = 20000, tol: float = 1e-10):
    """Project points onto the top two principal axes.

    Returns ``(projected, fractions, eigenvalues)``: the ``(N, 2)``
    mean-centred projection, the explained-variance fractions of the two
    axes and their covariance eigenvalues (non-increasing).  The axes come
    from power iteration on the sample covariance with one deflation step.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3 or X.shape[1] < 2:
        raise ValueError(f"need >= 3 points of dimension >= 2, got shape {X.shape}")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (X.shape[0] - 1)
    total = float(np.trace(C))
    if total <= 0.0:
        raise DegenerateError("all points are identical; covariance is zero")
    rng = np.random.default_rng(0)
    lam1, v1 = _top_eigenpair(C, max_iters, tol, rng)
    C2 = C - lam1 * np.outer(v1, v1)
    lam2, v2 = _top_eigenpair(C2, max_iters, tol, rng)
    # deflation leaves v1 as a null direction; keep v2 orthogonal to it
    v2 = v2 - (v2 @ v1) * v1
    n2 = np.linalg.norm(v2)
    if n2 > 0:
        v2 /= n2
    lam2 = max(lam2, 0.0)
    if lam2 > lam1:
        lam1, lam2, v1, v2 = lam2, lam1, v2, v1
    axes = np.stack([v1, v2], axis=1)
    eig = np.array([lam1, lam2])
    return Xc @ axes, eig / total, eig
