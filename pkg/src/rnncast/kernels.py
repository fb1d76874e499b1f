"""Time-loop kernels for the recurrent layers.

Every array here is float64 and time-major: sequences are ``(T, B, D)`` so
that ``xs[t]`` is a C-contiguous ``(B, D)`` block. Hidden-state buffers carry
one extra leading slot, ``hs[0]`` being the zero initial state, so
``hs[t + 1]`` is the output at step ``t``.

Gate-stacked parameter layout (columns of ``W``/``U`` and entries of ``b``):

* SimpleRNN: one block.
* LSTM: ``(i, f, g, o)``.
* GRU: ``(z, r, candidate)``; the candidate's recurrent term acts on ``r * h``.

The backward kernels take ``dhs`` (gradient of the loss with respect to each
step's output) and return gradients for the inputs and for ``W, U, b``.
"""
import numpy as np

from ._jit import njit

HSIG_SLOPE = 0.2
HSIG_OFFSET = 0.5
# 0.2 * a + 0.5 leaves (0, 1) outside this band
HSIG_EDGE = 2.5


@njit
def hard_sigmoid(a):
    return np.minimum(np.maximum(HSIG_SLOPE * a + HSIG_OFFSET, 0.0), 1.0)


@njit
def hard_sigmoid_grad(a):
    return HSIG_SLOPE * (np.abs(a) < HSIG_EDGE)


@njit
def rnn_forward(xs, W, U, b):
    T, B = xs.shape[0], xs.shape[1]
    H = U.shape[0]
    hs = np.zeros((T + 1, B, H))
    for t in range(T):
        hs[t + 1] = np.tanh(np.dot(xs[t], W) + np.dot(hs[t], U) + b)
    return hs


@njit
def rnn_backward(xs, W, U, hs, dhs):
    T, B = xs.shape[0], xs.shape[1]
    H = U.shape[0]
    dxs = np.zeros(xs.shape)
    dW = np.zeros(W.shape)
    dU = np.zeros(U.shape)
    db = np.zeros(H)
    dh_next = np.zeros((B, H))
    WT = np.ascontiguousarray(W.T)
    UT = np.ascontiguousarray(U.T)
    for t in range(T - 1, -1, -1):
        h = hs[t + 1]
        da = (dhs[t] + dh_next) * (1.0 - h * h)
        dW += np.dot(np.ascontiguousarray(xs[t].T), da)
        dU += np.dot(np.ascontiguousarray(hs[t].T), da)
        db += da.sum(axis=0)
        dxs[t] = np.dot(da, WT)
        dh_next = np.dot(da, UT)
    return dxs, dW, dU, db


@njit
def lstm_forward(xs, W, U, b):
    """Returns ``(hs, cs, pre, act)``; ``act`` holds post-activation gates."""
    T, B = xs.shape[0], xs.shape[1]
    H = U.shape[0]
    hs = np.zeros((T + 1, B, H))
    cs = np.zeros((T + 1, B, H))
    pre = np.empty((T, B, 4 * H))
    act = np.empty((T, B, 4 * H))
    for t in range(T):
        a = np.dot(xs[t], W) + np.dot(hs[t], U) + b
        pre[t] = a
        i = hard_sigmoid(a[:, :H])
        f = hard_sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = hard_sigmoid(a[:, 3 * H:])
        act[t, :, :H] = i
        act[t, :, H:2 * H] = f
        act[t, :, 2 * H:3 * H] = g
        act[t, :, 3 * H:] = o
        c = f * cs[t] + i * g
        cs[t + 1] = c
        hs[t + 1] = o * np.tanh(c)
    return hs, cs, pre, act


@njit
def lstm_backward(xs, W, U, hs, cs, pre, act, dhs):
    T, B = xs.shape[0], xs.shape[1]
    H = U.shape[0]
    dxs = np.zeros(xs.shape)
    dW = np.zeros(W.shape)
    dU = np.zeros(U.shape)
    db = np.zeros(4 * H)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    da = np.empty((B, 4 * H))
    WT = np.ascontiguousarray(W.T)
    UT = np.ascontiguousarray(U.T)
    for t in range(T - 1, -1, -1):
        i = act[t, :, :H]
        f = act[t, :, H:2 * H]
        g = act[t, :, 2 * H:3 * H]
        o = act[t, :, 3 * H:]
        tc = np.tanh(cs[t + 1])
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da[:, :H] = dc * g * hard_sigmoid_grad(pre[t, :, :H])
        da[:, H:2 * H] = dc * cs[t] * hard_sigmoid_grad(pre[t, :, H:2 * H])
        da[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        da[:, 3 * H:] = dh * tc * hard_sigmoid_grad(pre[t, :, 3 * H:])
        dc_next = dc * f
        dW += np.dot(np.ascontiguousarray(xs[t].T), da)
        dU += np.dot(np.ascontiguousarray(hs[t].T), da)
        db += da.sum(axis=0)
        dxs[t] = np.dot(da, WT)
        dh_next = np.dot(da, UT)
    return dxs, dW, dU, db


@njit
def gru_forward(xs, W, U, b):
    """Returns ``(hs, pre, act)``; ``act`` holds ``(z, r, candidate)``."""
    T, B = xs.shape[0], xs.shape[1]
    H = U.shape[0]
    U_zr = np.ascontiguousarray(U[:, :2 * H])
    U_h = np.ascontiguousarray(U[:, 2 * H:])
    hs = np.zeros((T + 1, B, H))
    pre = np.empty((T, B, 3 * H))
    act = np.empty((T, B, 3 * H))
    for t in range(T):
        h = hs[t]
        xw = np.dot(xs[t], W) + b
        a_zr = xw[:, :2 * H] + np.dot(h, U_zr)
        z = hard_sigmoid(a_zr[:, :H])
        r = hard_sigmoid(a_zr[:, H:])
        a_h = xw[:, 2 * H:] + np.dot(r * h, U_h)
        cand = np.tanh(a_h)
        pre[t, :, :2 * H] = a_zr
        pre[t, :, 2 * H:] = a_h
        act[t, :, :H] = z
        act[t, :, H:2 * H] = r
        act[t, :, 2 * H:] = cand
        hs[t + 1] = (1.0 - z) * h + z * cand
    return hs, pre, act


@njit
def gru_backward(xs, W, U, hs, pre, act, dhs):
    T, B = xs.shape[0], xs.shape[1]
    H = U.shape[0]
    U_zrT = np.ascontiguousarray(U[:, :2 * H].T)
    U_hT = np.ascontiguousarray(U[:, 2 * H:].T)
    WT = np.ascontiguousarray(W.T)
    dxs = np.zeros(xs.shape)
    dW = np.zeros(W.shape)
    dU_zr = np.zeros((H, 2 * H))
    dU_h = np.zeros((H, H))
    db = np.zeros(3 * H)
    dh_next = np.zeros((B, H))
    da = np.empty((B, 3 * H))
    for t in range(T - 1, -1, -1):
        h = hs[t]
        z = act[t, :, :H]
        r = act[t, :, H:2 * H]
        cand = act[t, :, 2 * H:]
        dh = dhs[t] + dh_next
        da_h = dh * z * (1.0 - cand * cand)
        d_rh = np.dot(da_h, U_hT)
        da[:, :H] = dh * (cand - h) * hard_sigmoid_grad(pre[t, :, :H])
        da[:, H:2 * H] = d_rh * h * hard_sigmoid_grad(pre[t, :, H:2 * H])
        da[:, 2 * H:] = da_h
        da_zr = np.ascontiguousarray(da[:, :2 * H])
        hT = np.ascontiguousarray(h.T)
        dW += np.dot(np.ascontiguousarray(xs[t].T), da)
        dU_zr += np.dot(hT, da_zr)
        dU_h += np.dot(np.ascontiguousarray((r * h).T), da_h)
        db += da.sum(axis=0)
        dxs[t] = np.dot(da, WT)
        dh_next = dh * (1.0 - z) + d_rh * r + np.dot(da_zr, U_zrT)
    dU = np.empty(U.shape)
    dU[:, :2 * H] = dU_zr
    dU[:, 2 * H:] = dU_h
    return dxs, dW, dU, db


@njit
def lagged_correlation(a, b, max_lag):
    """Pearson correlation of ``b[t]`` against ``a[t - lag]`` for each lag.

    Returns an array over ``lag = -max_lag .. max_lag``; positive lag means
    ``b`` trails ``a``. Only the overlapping part of the two series is used.
    Overlaps shorter than 2 points or with zero variance give 0.
    """
    n = a.shape[0]
    out = np.zeros(2 * max_lag + 1)
    for k in range(-max_lag, max_lag + 1):
        lo = max(0, k)
        hi = min(n, n + k)
        m = hi - lo
        if m < 2:
            continue
        sa = 0.0
        sb = 0.0
        for t in range(lo, hi):
            sa += a[t - k]
            sb += b[t]
        ma = sa / m
        mb = sb / m
        sab = 0.0
        saa = 0.0
        sbb = 0.0
        for t in range(lo, hi):
            da = a[t - k] - ma
            db = b[t] - mb
            sab += da * db
            saa += da * da
            sbb += db * db
        if saa > 0.0 and sbb > 0.0:
            out[k + max_lag] = sab / np.sqrt(saa * sbb)
    return out
