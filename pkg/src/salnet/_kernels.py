"""Compiled inner loops for the supervised experiments.

These mirror :mod:`salnet.sal` and :mod:`salnet.learning` step for step.
They exist only because a 1000-epoch BPTT run or a 100-layer DFNN run is
millions of tiny matrix-vector products, where interpreter overhead would
dominate.  Flags arrive as plain ints/bools so numba compiles one
specialisation per call signature.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _squash(v, enabled):
    if enabled:
        return math.tanh(v)
    return v


@njit(cache=True)
def _sal_neuron(w, x, o, theta, j, s_bar, n_count, reached, applied,
                eta_sal, beta, target, full_variant, nonlinear_criterion,
                once_mode, gated, update_bias):
    """Moving average + gate + SAL step for neuron ``j`` with weight row ``w``.

    Returns the neuron's instantaneous sensitivity.
    """
    m = w.shape[0]
    wn2 = 0.0
    for i in range(m):
        wn2 += w[i] * w[i]
    wn = math.sqrt(wn2)
    fp = 1.0 - o * o
    s = fp * wn
    s_bar[j] = beta * s_bar[j] + (1.0 - beta) * s
    n_count[j] += 1
    q = s_bar[j] if nonlinear_criterion else wn
    below = q <= target
    if not below:
        reached[j] = True
    apply = below or not gated
    if once_mode and reached[j]:
        apply = False
    if apply and wn > 0.0:
        a = eta_sal * fp / wn
        if full_variant:
            b = 2.0 * eta_sal * fp * o * wn
            for i in range(m):
                w[i] += a * w[i] - b * x[i]
        else:
            for i in range(m):
                w[i] += a * w[i]
        if update_bias:
            theta[j] += -2.0 * eta_sal * o * fp * wn
        applied[j] += 1
    return s


@njit(cache=True)
def elman_pattern(W_in, W_fb, th_h, w_out, th_out, x_seq, target,
                  sal_on, eta_sal, beta, sal_target, full_variant,
                  nonlinear_criterion, once_mode, gated,
                  s_bar, n_count, reached, applied,
                  mode, eta_in, eta_fb, eta_out, eta_bh, eta_bo,
                  squash, squash_out,
                  U, O, delta_rms, sens_stats, applied_now):
    """Forward pass with per-step SAL, then one BPTT update.

    ``U``/``O`` (shape ``(T+1, H)``) receive the hidden trajectory,
    ``delta_rms[t]`` the RMS over hidden neurons of the error signal at
    step ``t``, ``sens_stats`` the running (sum s, sum s^2, count) over
    neurons and steps, and ``applied_now[j]`` whether SAL fired for neuron
    ``j`` during this presentation.  ``mode`` is 0 (forward only), 1
    (backward pass for the error-signal probe, no weight change) or 2
    (full update).  Returns ``(d - y, y)``.
    """
    T1, H = U.shape
    n_in = W_in.shape[1]
    o_prev = np.zeros(H)
    for j in range(H):
        applied_now[j] = False
    for t in range(T1):
        x = x_seq[t]
        for j in range(H):
            acc = th_h[j]
            for i in range(n_in):
                acc += W_in[j, i] * x[i]
            for i in range(H):
                acc += W_fb[j, i] * o_prev[i]
            U[t, j] = acc
            O[t, j] = math.tanh(acc)
        # the feedback input at t=0 is the empty initial state, so no sensitivity there
        if t > 0 and sal_on:
            for j in range(H):
                before = applied[j]
                s = _sal_neuron(W_fb[j], o_prev, O[t, j], th_h, j, s_bar, n_count,
                                reached, applied, eta_sal, beta, sal_target,
                                full_variant, nonlinear_criterion, once_mode,
                                gated, True)
                if applied[j] != before:
                    applied_now[j] = True
                sens_stats[0] += s
                sens_stats[1] += s * s
                sens_stats[2] += 1.0
        elif t > 0:
            for j in range(H):
                wn2 = 0.0
                for i in range(H):
                    wn2 += W_fb[j, i] * W_fb[j, i]
                s = (1.0 - O[t, j] * O[t, j]) * math.sqrt(wn2)
                sens_stats[0] += s
                sens_stats[1] += s * s
                sens_stats[2] += 1.0
        for j in range(H):
            o_prev[j] = O[t, j]

    T = T1 - 1
    u_out = th_out[0]
    for j in range(H):
        u_out += w_out[j] * O[T, j]
    y = math.tanh(u_out)
    err = target - y
    if mode == 0:
        for t in range(T1):
            delta_rms[t] = 0.0
        return err, y

    fp_out = 1.0 - y * y
    d_out = _squash(err * fp_out, squash_out)
    dhat = np.empty(H)
    for j in range(H):
        dhat[j] = w_out[j] * d_out
    if mode == 2:
        for j in range(H):
            w_out[j] += eta_out * d_out * O[T, j]
        th_out[0] += eta_bo * d_out

    gW_in = np.zeros((H, n_in))
    gW_fb = np.zeros((H, H))
    g_th = np.zeros(H)
    delta = np.empty(H)
    for t in range(T, -1, -1):
        ss = 0.0
        for j in range(H):
            fp = 1.0 - O[t, j] * O[t, j]
            delta[j] = _squash(dhat[j] * fp, squash)
            ss += delta[j] * delta[j]
        delta_rms[t] = math.sqrt(ss / H)
        x = x_seq[t]
        for j in range(H):
            dj = delta[j]
            g_th[j] += dj
            for i in range(n_in):
                gW_in[j, i] += dj * x[i]
            if t > 0:
                for i in range(H):
                    gW_fb[j, i] += dj * O[t - 1, i]
        if t > 0:
            for i in range(H):
                acc = 0.0
                for j in range(H):
                    acc += W_fb[j, i] * delta[j]
                dhat[i] = acc
    if mode < 2:
        return err, y
    for j in range(H):
        th_h[j] += eta_bh * g_th[j]
        for i in range(n_in):
            W_in[j, i] += eta_in * gW_in[j, i]
        for i in range(H):
            W_fb[j, i] += eta_fb * gW_fb[j, i]
    return err, y


@njit(cache=True)
def dfnn_pattern(W0, b, Wh, w_out, b_out, x, target,
                 sal_on, eta_sal, beta, sal_target, full_variant,
                 nonlinear_criterion, once_mode, gated,
                 s_bar, n_count, reached, applied,
                 mode, eta_in, eta_hid, squash, squash_out,
                 U, O, delta_rms, dhat, delta):
    """One pattern presentation: forward with per-neuron SAL, then BP.

    ``b``, ``U``, ``O``, ``s_bar`` ... have shape ``(L_h, H)`` (one row per
    hidden layer, bottom first); ``Wh[k]`` maps hidden layer ``k`` to
    ``k+1``.  ``delta_rms[k]`` receives the RMS error signal of hidden
    layer ``k``.  ``mode`` as in :func:`elman_pattern`.  Returns ``(d - y, y)``.
    """
    Lh, H = U.shape
    n_in = W0.shape[1]
    for k in range(Lh):
        for j in range(H):
            acc = b[k, j]
            if k == 0:
                for i in range(n_in):
                    acc += W0[j, i] * x[i]
            else:
                for i in range(H):
                    acc += Wh[k - 1, j, i] * O[k - 1, i]
            U[k, j] = acc
            O[k, j] = math.tanh(acc)
        if sal_on:
            for j in range(H):
                if k == 0:
                    _sal_neuron(W0[j], x, O[0, j], b[0], j, s_bar[0], n_count[0],
                                reached[0], applied[0], eta_sal, beta, sal_target,
                                full_variant, nonlinear_criterion, once_mode, gated, True)
                else:
                    _sal_neuron(Wh[k - 1, j], O[k - 1], O[k, j], b[k], j, s_bar[k],
                                n_count[k], reached[k], applied[k], eta_sal, beta,
                                sal_target, full_variant, nonlinear_criterion,
                                once_mode, gated, True)
    u_out = b_out[0]
    for j in range(H):
        u_out += w_out[j] * O[Lh - 1, j]
    y = math.tanh(u_out)
    err = target - y
    if mode == 0:
        return err, y

    upd = mode == 2
    d_out = _squash(err * (1.0 - y * y), squash_out)
    for j in range(H):
        dhat[j] = w_out[j] * d_out
    if upd:
        for j in range(H):
            w_out[j] += eta_hid * d_out * O[Lh - 1, j]
        b_out[0] += eta_hid * d_out
    for k in range(Lh - 1, -1, -1):
        ss = 0.0
        for j in range(H):
            delta[j] = _squash(dhat[j] * (1.0 - O[k, j] * O[k, j]), squash)
            ss += delta[j] * delta[j]
        delta_rms[k] = math.sqrt(ss / H)
        if k > 0:
            for i in range(H):
                acc = 0.0
                for j in range(H):
                    acc += Wh[k - 1, j, i] * delta[j]
                dhat[i] = acc
            if not upd:
                continue
            for j in range(H):
                dj = eta_hid * delta[j]
                b[k, j] += dj
                for i in range(H):
                    Wh[k - 1, j, i] += dj * O[k - 1, i]
        elif upd:
            for j in range(H):
                dj = eta_in * delta[j]
                b[0, j] += dj
                for i in range(n_in):
                    W0[j, i] += dj * x[i]
    return err, y


@njit(cache=True)
def dfnn_epoch(W0, b, Wh, w_out, b_out, X, targets, order,
               sal_on, eta_sal, beta, sal_target, full_variant,
               nonlinear_criterion, once_mode, gated,
               s_bar, n_count, reached, applied,
               mode, eta_in, eta_hid, squash, squash_out,
               U, O, delta_rms, errors):
    """Present the rows of ``X`` in ``order``; ``errors[p]`` gets pattern p's error."""
    H = U.shape[1]
    dhat = np.empty(H)
    delta = np.empty(H)
    ok = True
    for idx in range(order.shape[0]):
        p = order[idx]
        err, y = dfnn_pattern(W0, b, Wh, w_out, b_out, X[p], targets[p],
                              sal_on, eta_sal, beta, sal_target, full_variant,
                              nonlinear_criterion, once_mode, gated,
                              s_bar, n_count, reached, applied,
                              mode, eta_in, eta_hid, squash, squash_out,
                              U, O, delta_rms, dhat, delta)
        errors[p] = err
        if not math.isfinite(err):
            ok = False
            break
    return ok


@njit(cache=True)
def dfnn_outputs(W0, b, Wh, w_out, b_out, X, hidden_out, keep_layers):
    """Noiseless forward pass over the rows of ``X``.

    Returns the outputs; hidden activations of the layers listed in
    ``keep_layers`` are copied to ``hidden_out[len(keep), N, H]``.
    """
    N = X.shape[0]
    Lh, H = b.shape
    n_in = W0.shape[1]
    out = np.empty(N)
    cur = np.empty(H)
    nxt = np.empty(H)
    for p in range(N):
        for j in range(H):
            acc = b[0, j]
            for i in range(n_in):
                acc += W0[j, i] * X[p, i]
            cur[j] = math.tanh(acc)
        for q in range(keep_layers.shape[0]):
            if keep_layers[q] == 0:
                for j in range(H):
                    hidden_out[q, p, j] = cur[j]
        for k in range(1, Lh):
            for j in range(H):
                acc = b[k, j]
                for i in range(H):
                    acc += Wh[k - 1, j, i] * cur[i]
                nxt[j] = math.tanh(acc)
            for j in range(H):
                cur[j] = nxt[j]
            for q in range(keep_layers.shape[0]):
                if keep_layers[q] == k:
                    for j in range(H):
                        hidden_out[q, p, j] = cur[j]
        acc = b_out[0]
        for j in range(H):
            acc += w_out[j] * cur[j]
        out[p] = math.tanh(acc)
    return out
