"""Pure-numpy reference implementations of the hot numeric kernels.

These are the fallback path used when numba is unavailable or disabled via
``DCNAR_NUMBA=0``. The numba backend mirrors every function here with
identical signatures and (up to floating-point summation order) identical
results; ``tests/test_kernels.py`` checks the two backends against each
other.

Conventions shared by both backends:

* additive-model lag windows ``X`` have shape (B, N, L) with ``X[b, j, k]``
  holding the value of source variable ``j`` at lag ``k + 1``;
* LSTM gate parameters are packed row-wise as [input; forget; cell; output],
  each block of ``H`` rows;
* rollout coefficient stacks ``coef`` have shape (S, p, N, N) where
  ``coef[s, k]`` multiplies the state ``k + 1`` steps back.
"""

import numpy as np


# ---------------------------------------------------------------------------
# Additive discovery model (per-source MLPs with shared target bias)
# ---------------------------------------------------------------------------

def navar_contributions(w1, b1, w2, x):
    """Per-edge contributions of a batch of lag windows.

    Parameters
    ----------
    w1 : (N, H, L) first-layer weights, one block per source variable
    b1 : (N, H) first-layer biases
    w2 : (N, N, H) second-layer weights; ``w2[j, i]`` maps the hidden state
        of source ``j`` to its contribution to target ``i``
    x : (B, N, L) batch of lag windows

    Returns
    -------
    (B, N, N) array ``c`` with ``c[b, i, j]`` the contribution of source
    ``j`` to target ``i`` for row ``b``.
    """
    z = np.einsum("jhl,bjl->bjh", w1, x) + b1[None, :, :]
    hidden = np.maximum(z, 0.0)
    return np.einsum("jih,bjh->bij", w2, hidden)


def navar_batch(w1, b1, w2, bias, x, y, l1, weight_decay):
    """Full objective and parameter gradients for one batch.

    The objective is

        mean squared error over (row, target)
        + l1 * mean absolute contribution over (row, target, source)
        + weight_decay * (sum w1**2 + sum w2**2)

    Returns ``(loss, dw1, db1, dw2, dbias)``.
    """
    nb, n, _ = x.shape
    z = np.einsum("jhl,bjl->bjh", w1, x) + b1[None, :, :]
    hidden = np.maximum(z, 0.0)
    contrib = np.einsum("jih,bjh->bij", w2, hidden)
    pred = contrib.sum(axis=2) + bias[None, :]

    err = pred - y
    loss = float(np.mean(err * err))
    loss += l1 * float(np.mean(np.abs(contrib)))
    loss += weight_decay * (float(np.sum(w1 * w1)) + float(np.sum(w2 * w2)))

    dpred = (2.0 / (nb * n)) * err
    dcontrib = dpred[:, :, None] + (l1 / (nb * n * n)) * np.sign(contrib)
    dbias = dpred.sum(axis=0)
    dw2 = np.einsum("bij,bjh->jih", dcontrib, hidden)
    dhidden = np.einsum("bij,jih->bjh", dcontrib, w2)
    dz = np.where(z > 0.0, dhidden, 0.0)
    dw1 = np.einsum("bjh,bjl->jhl", dz, x)
    db1 = dz.sum(axis=0)
    dw1 += 2.0 * weight_decay * w1
    dw2 += 2.0 * weight_decay * w2
    return loss, dw1, db1, dw2, dbias


# ---------------------------------------------------------------------------
# Single-layer LSTM with output-side dropout
# ---------------------------------------------------------------------------

def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(wx, wh, bg, wout, bout, x, mask):
    """One-step predictions for a batch of sequences.

    ``x`` is (B, L, N); ``mask`` is a (B, H) inverted-dropout mask applied to
    the final hidden state before the dense output layer (all-ones when
    dropout is off). Returns (B, N) predictions.
    """
    nb, length, _ = x.shape
    hwidth = wh.shape[1]
    h = np.zeros((nb, hwidth))
    c = np.zeros((nb, hwidth))
    for t in range(length):
        z = x[:, t] @ wx.T + h @ wh.T + bg[None, :]
        gi = _sigmoid(z[:, :hwidth])
        gf = _sigmoid(z[:, hwidth:2 * hwidth])
        gc = np.tanh(z[:, 2 * hwidth:3 * hwidth])
        go = _sigmoid(z[:, 3 * hwidth:])
        c = gf * c + gi * gc
        h = go * np.tanh(c)
    return (h * mask) @ wout.T + bout[None, :]


def lstm_batch(wx, wh, bg, wout, bout, x, y, mask):
    """Mean-squared-error loss and gradients via backprop through time.

    Returns ``(loss, dwx, dwh, dbg, dwout, dbout)``.
    """
    nb, length, n = x.shape
    hwidth = wh.shape[1]

    hs = np.zeros((length + 1, nb, hwidth))
    cs = np.zeros((length + 1, nb, hwidth))
    gates = np.zeros((length, nb, 4 * hwidth))
    for t in range(length):
        z = x[:, t] @ wx.T + hs[t] @ wh.T + bg[None, :]
        gi = _sigmoid(z[:, :hwidth])
        gf = _sigmoid(z[:, hwidth:2 * hwidth])
        gc = np.tanh(z[:, 2 * hwidth:3 * hwidth])
        go = _sigmoid(z[:, 3 * hwidth:])
        gates[t] = np.concatenate([gi, gf, gc, go], axis=1)
        cs[t + 1] = gf * cs[t] + gi * gc
        hs[t + 1] = go * np.tanh(cs[t + 1])

    hdrop = hs[length] * mask
    pred = hdrop @ wout.T + bout[None, :]
    err = pred - y
    loss = float(np.mean(err * err))

    dpred = (2.0 / (nb * n)) * err
    dwout = dpred.T @ hdrop
    dbout = dpred.sum(axis=0)
    dh = (dpred @ wout) * mask
    dc = np.zeros((nb, hwidth))

    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    dbg = np.zeros_like(bg)
    for t in range(length - 1, -1, -1):
        gi = gates[t, :, :hwidth]
        gf = gates[t, :, hwidth:2 * hwidth]
        gc = gates[t, :, 2 * hwidth:3 * hwidth]
        go = gates[t, :, 3 * hwidth:]
        tc = np.tanh(cs[t + 1])
        dgo = dh * tc
        dc = dc + dh * go * (1.0 - tc * tc)
        dgi = dc * gc
        dgf = dc * cs[t]
        dgc = dc * gi
        dz = np.concatenate(
            [
                dgi * gi * (1.0 - gi),
                dgf * gf * (1.0 - gf),
                dgc * (1.0 - gc * gc),
                dgo * go * (1.0 - go),
            ],
            axis=1,
        )
        dwx += dz.T @ x[:, t]
        dwh += dz.T @ hs[t]
        dbg += dz.sum(axis=0)
        dh = dz @ wh
        dc = dc * gf
    return loss, dwx, dwh, dbg, dwout, dbout


# ---------------------------------------------------------------------------
# Linear rollouts (simulation and residual-resampling ensembles)
# ---------------------------------------------------------------------------

def rollout(coef, init, shocks):
    """Iterate ``x_s = sum_k coef[s, k] @ x_{s-k-1} + shocks[b, s]``.

    Parameters
    ----------
    coef : (S, p, N, N) per-step coefficient matrices, shared by all paths
    init : (p, N) initial lags, most recent first
    shocks : (B, S, N) per-path additive terms

    Returns
    -------
    (B, S, N) array of simulated paths.
    """
    nb, steps, n = shocks.shape
    p = init.shape[0]
    state = np.broadcast_to(init, (nb, p, n)).copy()
    out = np.empty((nb, steps, n))
    for s in range(steps):
        x = np.einsum("kij,bkj->bi", coef[s], state) + shocks[:, s]
        out[:, s] = x
        if p > 1:
            state[:, 1:] = state[:, :-1]
        state[:, 0] = x
    return out
