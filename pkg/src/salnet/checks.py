"""Numerical self-checks shared by ``salnet selftest`` and the test suite.

Each check returns the measured quantity; callers decide on tolerances.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .lyapunov import estimate_lambda
from .networks import FlatRnnSpec, init_network
from .numerics import Rng, scale_to_spectral_radius
from .sal import SalConfig, SalVariant, sal_delta_theta, sal_delta_w, sensitivity


def _rel_err(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def sal_gradient_check(rng: Rng, instances: int = 100, h: float = 1e-6) -> float:
    """Worst relative error of the SAL steps against central differences of ``s``."""
    cfg = SalConfig(eta_sal=1.0, beta=0.99, variant=SalVariant.FULL)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, 9))
        w = rng.uniform(-1.0, 1.0, n)
        x = rng.uniform(-1.0, 1.0, n)
        theta = float(rng.uniform(-0.5, 0.5))

        def s_of(w_, th_):
            return sensitivity(w_ @ x + th_, w_)

        grad = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            grad[i] = (s_of(w + e, theta) - s_of(w - e, theta)) / (2 * h)
        g_theta = (s_of(w, theta + h) - s_of(w, theta - h)) / (2 * h)
        o = np.tanh(w @ x + theta)
        worst = max(worst, _rel_err(sal_delta_w(w, x, o, cfg), grad))
        worst = max(worst, _rel_err([sal_delta_theta(o, np.linalg.norm(w), cfg)], [g_theta]))
    return worst


def _elman_toy(rng: Rng, H: int, n_in: int):
    return {
        "W_in": rng.uniform(-1.0, 1.0, (H, n_in)),
        "W_fb": rng.uniform(-1.0, 1.0, (H, H)),
        "th_h": rng.uniform(-0.5, 0.5, H),
        "w_out": rng.uniform(-1.0, 1.0, H),
        "th_out": rng.uniform(-0.5, 0.5, 1),
    }


def _elman_call(p, x_seq, target, mode):
    H = p["W_fb"].shape[0]
    T1 = x_seq.shape[0]
    sal = np.zeros(H), np.zeros(H, np.int64), np.zeros(H, np.bool_), np.zeros(H, np.int64)
    return _kernels.elman_pattern(
        p["W_in"], p["W_fb"], p["th_h"], p["w_out"], p["th_out"], x_seq, target,
        False, 0.0, 0.5, 1.0, True, True, False, True, *sal,
        mode, 1.0, 1.0, 1.0, 1.0, 1.0, False, False,
        np.zeros((T1, H)), np.zeros((T1, H)), np.zeros(T1), np.zeros(3), np.zeros(H, np.bool_),
    )


def bptt_gradient_check(rng: Rng, trials: int = 10, h: float = 1e-6) -> float:
    """Worst relative error of the BPTT step (squash and SAL off) against finite differences of E."""
    worst = 0.0
    for _ in range(trials):
        H, n_in, T1 = int(rng.integers(2, 5)), 2, int(rng.integers(2, 4))
        p = _elman_toy(rng, H, n_in)
        x_seq = rng.uniform(-1.0, 1.0, (T1, n_in))
        target = float(rng.uniform(-0.8, 0.8))

        def energy():
            err, _ = _elman_call(p, x_seq, target, 0)
            return 0.5 * err * err

        q = {k: v.copy() for k, v in p.items()}
        _elman_call(q, x_seq, target, 2)
        for key, arr in p.items():
            step = q[key] - arr  # equals -dE/dw with unit rates
            fd = np.empty_like(arr)
            for idx in np.ndindex(arr.shape):
                keep = arr[idx]
                arr[idx] = keep + h
                ep = energy()
                arr[idx] = keep - h
                em = energy()
                arr[idx] = keep
                fd[idx] = -(ep - em) / (2 * h)
            worst = max(worst, _rel_err(step, fd))
    return worst


def bp_gradient_check(rng: Rng, trials: int = 10, h: float = 1e-6) -> float:
    """Same as :func:`bptt_gradient_check` for a DFNN of up to three hidden layers of up to four neurons."""
    worst = 0.0
    for _ in range(trials):
        Lh, H, n_in = int(rng.integers(1, 4)), int(rng.integers(2, 5)), 3
        p = {
            "W0": rng.uniform(-1.0, 1.0, (H, n_in)),
            "b": rng.uniform(-0.5, 0.5, (Lh, H)),
            "Wh": rng.uniform(-1.0, 1.0, (max(Lh - 1, 0), H, H)),
            "w_out": rng.uniform(-1.0, 1.0, H),
            "b_out": rng.uniform(-0.5, 0.5, 1),
        }
        x = rng.uniform(-1.0, 1.0, n_in)
        target = float(rng.uniform(-0.8, 0.8))

        def call(d, mode):
            sal = np.zeros((Lh, H)), np.zeros((Lh, H), np.int64), np.zeros((Lh, H), np.bool_), np.zeros((Lh, H), np.int64)
            return _kernels.dfnn_pattern(
                d["W0"], d["b"], d["Wh"], d["w_out"], d["b_out"], x, target,
                False, 0.0, 0.5, 1.0, True, True, False, True, *sal,
                mode, 1.0, 1.0, False, False,
                np.zeros((Lh, H)), np.zeros((Lh, H)), np.zeros(Lh), np.zeros(H), np.zeros(H),
            )

        q = {k: v.copy() for k, v in p.items()}
        call(q, 2)
        for key, arr in p.items():
            if arr.size == 0:
                continue
            fd = np.empty_like(arr)
            for idx in np.ndindex(arr.shape):
                keep = arr[idx]
                arr[idx] = keep + h
                ep = 0.5 * call(p, 0)[0] ** 2
                arr[idx] = keep - h
                em = 0.5 * call(p, 0)[0] ** 2
                arr[idx] = keep
                fd[idx] = -(ep - em) / (2 * h)
            worst = max(worst, _rel_err(q[key] - arr, fd))
    return worst


def _unit_sensitivity_layer(rng: Rng, n: int, m: int):
    """Random layer and input at which every neuron has sensitivity exactly 1."""
    x = rng.uniform(-1.0, 1.0, n)
    D = rng.normal((m, n))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    U = rng.uniform(-1.0, 1.0, m)
    fp = 1.0 - np.tanh(U) ** 2
    W = D / fp[:, None]
    theta = U - W @ x
    return W, theta, x, fp


def forward_variance_ratio(rng: Rng, n: int = 200, m: int = 200, trials: int = 1000, eps: float = 1e-6) -> float:
    """``E||do||^2 / E||dx||^2`` for small isotropic input perturbations through unit-sensitivity layers."""
    num = den = 0.0
    for _ in range(trials):
        W, theta, x, _ = _unit_sensitivity_layer(rng, n, m)
        dx = rng.normal(n)
        dx *= eps / np.linalg.norm(dx)
        do = np.tanh(W @ (x + dx) + theta) - np.tanh(W @ x + theta)
        num += do @ do
        den += dx @ dx
    return float(num / den)


def backward_variance_ratio(rng: Rng, n: int = 200, m: int = 200, trials: int = 1000) -> float:
    """``E||delta_in||^2 / E||delta_out||^2`` for isotropic error signals through unit-sensitivity layers."""
    num = den = 0.0
    for _ in range(trials):
        W, _, _, fp = _unit_sensitivity_layer(rng, n, m)
        d_out = rng.normal(m)
        d_in = W.T @ (fp * d_out)
        num += d_in @ d_in
        den += d_out @ d_out
    return float(num / den)


def linear_lambda(rho: float, rng: Rng, n: int = 100) -> float:
    """λ estimate of a frozen identity-activation flat RNN with spectral radius ``rho``."""
    net = init_network(FlatRnnSpec(n=n, rate=1.0, init=1.0, activation="identity"), rng)
    net.params["W"][...] = scale_to_spectral_radius(net.params["W"], rho)
    # base trajectory at the fixed point, so the separation is never swamped by the state
    net.u[0] = np.zeros(n)
    net.o[0] = np.zeros(n)
    return estimate_lambda(net, rng)


def run_all(seed: int = 0) -> list[tuple[str, float, bool]]:
    """Every check with its pass threshold, as ``(name, value, passed)``."""
    rng = Rng(seed)
    out = []
    v = sal_gradient_check(rng)
    out.append(("sal-gradient rel. error", v, v < 1e-6))
    v = bptt_gradient_check(rng)
    out.append(("bptt-gradient rel. error", v, v < 1e-5))
    v = bp_gradient_check(rng)
    out.append(("bp-gradient rel. error", v, v < 1e-5))
    v = forward_variance_ratio(rng)
    out.append(("forward variance ratio", v, abs(v - 1.0) <= 0.1))
    v = backward_variance_ratio(rng)
    out.append(("backward variance ratio", v, abs(v - 1.0) <= 0.1))
    for rho in (0.5, 1.0, 1.5):
        v = linear_lambda(rho, rng)
        out.append((f"linear lambda, rho={rho}", v, bool(abs(v - np.log(rho)) <= 0.05)))
    return out


__all__ = [
    "sal_gradient_check", "bptt_gradient_check", "bp_gradient_check",
    "forward_variance_ratio", "backward_variance_ratio", "linear_lambda", "run_all",
]
