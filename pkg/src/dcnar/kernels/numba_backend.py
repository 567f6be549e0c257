"""Numba-compiled versions of the hot kernels.

Same signatures and semantics as :mod:`dcnar.kernels.numpy_backend`; see
that module for the shape conventions. Loops are written out explicitly so
numba can fuse them; ``cache=True`` persists the compiled code so repeated
processes (tests, CLI runs) skip recompilation.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def navar_contributions(w1, b1, w2, x):
    nb, n, nlags = x.shape
    hwidth = w1.shape[1]
    contrib = np.zeros((nb, n, n))
    for b in range(nb):
        for j in range(n):
            for h in range(hwidth):
                z = b1[j, h]
                for k in range(nlags):
                    z += w1[j, h, k] * x[b, j, k]
                if z > 0.0:
                    for i in range(n):
                        contrib[b, i, j] += w2[j, i, h] * z
    return contrib


@njit(cache=True)
def navar_batch(w1, b1, w2, bias, x, y, l1, weight_decay):
    nb, n, nlags = x.shape
    hwidth = w1.shape[1]

    hidden = np.zeros((nb, n, hwidth))
    for b in range(nb):
        for j in range(n):
            for h in range(hwidth):
                z = b1[j, h]
                for k in range(nlags):
                    z += w1[j, h, k] * x[b, j, k]
                if z > 0.0:
                    hidden[b, j, h] = z

    contrib = np.zeros((nb, n, n))
    for b in range(nb):
        for j in range(n):
            for h in range(hwidth):
                hv = hidden[b, j, h]
                if hv != 0.0:
                    for i in range(n):
                        contrib[b, i, j] += w2[j, i, h] * hv

    loss = 0.0
    dpred = np.zeros((nb, n))
    for b in range(nb):
        for i in range(n):
            p = bias[i]
            for j in range(n):
                p += contrib[b, i, j]
            e = p - y[b, i]
            loss += e * e
            dpred[b, i] = 2.0 * e / (nb * n)
    loss /= nb * n

    l1_scale = l1 / (nb * n * n)
    abs_sum = 0.0
    dcontrib = np.empty((nb, n, n))
    for b in range(nb):
        for i in range(n):
            for j in range(n):
                c = contrib[b, i, j]
                abs_sum += abs(c)
                if c > 0.0:
                    dcontrib[b, i, j] = dpred[b, i] + l1_scale
                elif c < 0.0:
                    dcontrib[b, i, j] = dpred[b, i] - l1_scale
                else:
                    dcontrib[b, i, j] = dpred[b, i]
    loss += l1 * abs_sum / (nb * n * n)

    dw1 = np.zeros_like(w1)
    db1 = np.zeros_like(b1)
    dw2 = np.zeros_like(w2)
    dbias = np.zeros(n)
    for b in range(nb):
        for i in range(n):
            dbias[i] += dpred[b, i]
        for j in range(n):
            for h in range(hwidth):
                hv = hidden[b, j, h]
                dh = 0.0
                for i in range(n):
                    dc = dcontrib[b, i, j]
                    dw2[j, i, h] += dc * hv
                    dh += dc * w2[j, i, h]
                if hv > 0.0:
                    for k in range(nlags):
                        dw1[j, h, k] += dh * x[b, j, k]
                    db1[j, h] += dh

    wd_sum = 0.0
    for j in range(n):
        for h in range(hwidth):
            for k in range(nlags):
                wd_sum += w1[j, h, k] * w1[j, h, k]
                dw1[j, h, k] += 2.0 * weight_decay * w1[j, h, k]
            for i in range(n):
                wd_sum += w2[j, i, h] * w2[j, i, h]
                dw2[j, i, h] += 2.0 * weight_decay * w2[j, i, h]
    loss += weight_decay * wd_sum
    return loss, dw1, db1, dw2, dbias


@njit(cache=True)
def _sigmoid_scalar(z):
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    ez = np.exp(z)
    return ez / (1.0 + ez)


@njit(cache=True)
def lstm_forward(wx, wh, bg, wout, bout, x, mask):
    nb, length, n = x.shape
    hwidth = wh.shape[1]
    pred = np.zeros((nb, n))
    for b in range(nb):
        h = np.zeros(hwidth)
        c = np.zeros(hwidth)
        hprev = np.zeros(hwidth)
        for t in range(length):
            for u in range(hwidth):
                hprev[u] = h[u]
            for u in range(hwidth):
                zi = bg[u]
                zf = bg[hwidth + u]
                zc = bg[2 * hwidth + u]
                zo = bg[3 * hwidth + u]
                for v in range(n):
                    xv = x[b, t, v]
                    zi += wx[u, v] * xv
                    zf += wx[hwidth + u, v] * xv
                    zc += wx[2 * hwidth + u, v] * xv
                    zo += wx[3 * hwidth + u, v] * xv
                for v in range(hwidth):
                    hv = hprev[v]
                    zi += wh[u, v] * hv
                    zf += wh[hwidth + u, v] * hv
                    zc += wh[2 * hwidth + u, v] * hv
                    zo += wh[3 * hwidth + u, v] * hv
                gi = _sigmoid_scalar(zi)
                gf = _sigmoid_scalar(zf)
                gc = np.tanh(zc)
                go = _sigmoid_scalar(zo)
                c[u] = gf * c[u] + gi * gc
                h[u] = go * np.tanh(c[u])
        for i in range(n):
            acc = bout[i]
            for u in range(hwidth):
                acc += wout[i, u] * h[u] * mask[b, u]
            pred[b, i] = acc
    return pred


@njit(cache=True)
def lstm_batch(wx, wh, bg, wout, bout, x, y, mask):
    nb, length, n = x.shape
    hwidth = wh.shape[1]

    hs = np.zeros((length + 1, nb, hwidth))
    cs = np.zeros((length + 1, nb, hwidth))
    gates = np.zeros((length, nb, 4 * hwidth))
    for t in range(length):
        for b in range(nb):
            for u in range(hwidth):
                zi = bg[u]
                zf = bg[hwidth + u]
                zc = bg[2 * hwidth + u]
                zo = bg[3 * hwidth + u]
                for v in range(n):
                    xv = x[b, t, v]
                    zi += wx[u, v] * xv
                    zf += wx[hwidth + u, v] * xv
                    zc += wx[2 * hwidth + u, v] * xv
                    zo += wx[3 * hwidth + u, v] * xv
                for v in range(hwidth):
                    hv = hs[t, b, v]
                    zi += wh[u, v] * hv
                    zf += wh[hwidth + u, v] * hv
                    zc += wh[2 * hwidth + u, v] * hv
                    zo += wh[3 * hwidth + u, v] * hv
                gi = _sigmoid_scalar(zi)
                gf = _sigmoid_scalar(zf)
                gc = np.tanh(zc)
                go = _sigmoid_scalar(zo)
                gates[t, b, u] = gi
                gates[t, b, hwidth + u] = gf
                gates[t, b, 2 * hwidth + u] = gc
                gates[t, b, 3 * hwidth + u] = go
                cs[t + 1, b, u] = gf * cs[t, b, u] + gi * gc
                hs[t + 1, b, u] = go * np.tanh(cs[t + 1, b, u])

    loss = 0.0
    dpred = np.zeros((nb, n))
    for b in range(nb):
        for i in range(n):
            p = bout[i]
            for u in range(hwidth):
                p += wout[i, u] * hs[length, b, u] * mask[b, u]
            e = p - y[b, i]
            loss += e * e
            dpred[b, i] = 2.0 * e / (nb * n)
    loss /= nb * n

    dwout = np.zeros_like(wout)
    dbout = np.zeros(n)
    dh = np.zeros((nb, hwidth))
    for b in range(nb):
        for i in range(n):
            d = dpred[b, i]
            dbout[i] += d
            for u in range(hwidth):
                dwout[i, u] += d * hs[length, b, u] * mask[b, u]
                dh[b, u] += d * wout[i, u] * mask[b, u]

    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    dbg = np.zeros_like(bg)
    dc = np.zeros((nb, hwidth))
    dz = np.zeros((nb, 4 * hwidth))
    for t in range(length - 1, -1, -1):
        for b in range(nb):
            for u in range(hwidth):
                gi = gates[t, b, u]
                gf = gates[t, b, hwidth + u]
                gc = gates[t, b, 2 * hwidth + u]
                go = gates[t, b, 3 * hwidth + u]
                tc = np.tanh(cs[t + 1, b, u])
                dgo = dh[b, u] * tc
                dcu = dc[b, u] + dh[b, u] * go * (1.0 - tc * tc)
                dgi = dcu * gc
                dgf = dcu * cs[t, b, u]
                dgc = dcu * gi
                dz[b, u] = dgi * gi * (1.0 - gi)
                dz[b, hwidth + u] = dgf * gf * (1.0 - gf)
                dz[b, 2 * hwidth + u] = dgc * (1.0 - gc * gc)
                dz[b, 3 * hwidth + u] = dgo * go * (1.0 - go)
                dc[b, u] = dcu * gf
        for b in range(nb):
            for r in range(4 * hwidth):
                d = dz[b, r]
                dbg[r] += d
                for v in range(n):
                    dwx[r, v] += d * x[b, t, v]
                for v in range(hwidth):
                    dwh[r, v] += d * hs[t, b, v]
            for u in range(hwidth):
                acc = 0.0
                for r in range(4 * hwidth):
                    acc += dz[b, r] * wh[r, u]
                dh[b, u] = acc
    return loss, dwx, dwh, dbg, dwout, dbout


@njit(cache=True)
def rollout(coef, init, shocks):
    nb, steps, n = shocks.shape
    p = init.shape[0]
    out = np.empty((nb, steps, n))
    state = np.empty((nb, p, n))
    for b in range(nb):
        for k in range(p):
            for i in range(n):
                state[b, k, i] = init[k, i]
    for s in range(steps):
        for b in range(nb):
            x = np.zeros(n)
            for k in range(p):
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc += coef[s, k, i, j] * state[b, k, j]
                    x[i] += acc
            for i in range(n):
                x[i] += shocks[b, s, i]
            for k in range(p - 1, 0, -1):
                for i in range(n):
                    state[b, k, i] = state[b, k - 1, i]
            for i in range(n):
                state[b, 0, i] = x[i]
                out[b, s, i] = x[i]
    return out
