"""Forward/backward pairs for the CRNN primitives.

Every ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes ``(d_out, cache)`` and returns gradients in argument order.  Arrays are
float64 and laid out ``[B, C, T, F]`` for the convolutional part and
``[B, T, D]`` for the recurrent part.
"""
from functools import lru_cache

import numpy as np

from ..errors import InvalidInput, ShapeError
from ..kernels import col2im3x3, im2col3x3

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


# -- layout helpers ------------------------------------------------------------
#
# The convolutional stack is exposed as [B, C, T, F] but computed channels-last:
# every op below returns a [B, C, T, F] view of a [B, T, F, C] buffer, so
# per-channel work becomes column operations on an [N, C] matrix.

def _cl(x):
    return x.transpose(0, 2, 3, 1)


def _cf(x):
    return x.transpose(0, 3, 1, 2)


def _rows(x):
    """``[B, C, T, F]`` -> ``[B*T*F, C]`` (free when ``x`` is channels-last in memory)."""
    return _cl(x).reshape(-1, x.shape[1])


@lru_cache(maxsize=16)
def _ones(n):
    out = np.ones(n)
    out.flags.writeable = False
    return out


def _colsum(m):
    # a BLAS product beats ndarray.sum(axis=0) on tall, narrow matrices
    return _ones(m.shape[0]) @ m


# -- convolution -------------------------------------------------------------

def _wmat(w):
    """``[C_out, C_in, 3, 3]`` -> ``[C_out, 9*C_in]`` matching the patch column order."""
    return w.transpose(0, 2, 3, 1).reshape(w.shape[0], -1)


def conv2d_forward(x, w, b):
    """3x3 convolution, stride 1, zero padding 1.  ``w`` is ``[C_out, C_in, 3, 3]``."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects [B, C, T, F], got {x.shape}")
    c_out, c_in, kt, kf = w.shape
    if (kt, kf) != (3, 3):
        raise ShapeError(f"conv2d kernel must be 3x3, got {kt}x{kf}")
    if x.shape[1] != c_in:
        raise ShapeError(f"conv2d input has {x.shape[1]} channels, kernel expects {c_in}")
    if b.shape != (c_out,):
        raise ShapeError(f"conv2d bias shape {b.shape} != ({c_out},)")
    bsz, _, t, f = x.shape
    xc = np.ascontiguousarray(_cl(x))
    out = im2col3x3(xc) @ _wmat(w).T
    out += b
    return _cf(out.reshape(bsz, t, f, c_out)), (xc, w)


def conv2d_backward(dout, cache, need_input_grad=True):
    xc, w = cache
    c_out = w.shape[0]
    c_in = w.shape[1]
    d2 = _rows(dout)
    db = _colsum(d2)
    dw = (d2.T @ im2col3x3(xc)).reshape(c_out, 3, 3, c_in).transpose(0, 3, 1, 2)
    if not need_input_grad:
        return None, dw, db
    return _cf(col2im3x3(d2 @ _wmat(w), xc.shape)), dw, db


# -- batch normalization -----------------------------------------------------

def batch_norm_forward(x, gamma, beta, running_mean, running_var, training, update_stats=True):
    """Per-channel normalization over (B, T, F).

    In training mode batch statistics are used and, if ``update_stats``,
    ``running_mean``/``running_var`` are updated in place with momentum 0.1
    (unbiased variance, as is conventional).
    """
    bsz, c, t, f = x.shape
    rows = _rows(x)
    n = rows.shape[0]
    if training:
        mean = _colsum(rows) / n
        xhat = rows - mean
        var = _colsum(xhat * xhat) / n
        if update_stats:
            unbiased = var * n / max(n - 1, 1)
            running_mean *= 1.0 - BN_MOMENTUM
            running_mean += BN_MOMENTUM * mean
            running_var *= 1.0 - BN_MOMENTUM
            running_var += BN_MOMENTUM * unbiased
    else:
        var = running_var
        xhat = rows - running_mean
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat *= inv_std
    out = xhat * gamma
    out += beta
    return _cf(out.reshape(bsz, t, f, c)), (xhat, inv_std, gamma, training)


def batch_norm_backward(dout, cache):
    xhat, inv_std, gamma, training = cache
    bsz, c, t, f = dout.shape
    d = _rows(dout)
    dgamma = _colsum(d * xhat)
    dbeta = _colsum(d)
    if not training:
        dx = d * (gamma * inv_std)
    else:
        n = d.shape[0]
        dx = d - dbeta / n
        dx -= xhat * (dgamma / n)
        dx *= gamma * inv_std
    return _cf(dx.reshape(bsz, t, f, c)), dgamma, dbeta


# -- pooling, dropout, activations -------------------------------------------

def avg_pool_forward(x, kernel):
    """Non-overlapping average pooling (stride == kernel); trailing remainders are dropped."""
    kt, kf = kernel
    bsz, c, t, f = x.shape
    if kt > t or kf > f:
        raise ShapeError(f"pool kernel {kernel} larger than input extent {(t, f)}")
    to, fo = t // kt, f // kf
    xc = _cl(x)
    out = np.zeros((bsz, to, fo, c))
    for i in range(kt):
        for j in range(kf):
            out += xc[:, i:to * kt:kt, j:fo * kf:kf, :]
    out *= 1.0 / (kt * kf)
    return _cf(out), (x.shape, kernel)


def avg_pool_backward(dout, cache):
    (bsz, c, t, f), (kt, kf) = cache
    to, fo = dout.shape[2], dout.shape[3]
    dx = np.zeros((bsz, t, f, c))
    share = _cl(dout) * (1.0 / (kt * kf))
    for i in range(kt):
        for j in range(kf):
            dx[:, i:to * kt:kt, j:fo * kf:kf, :] = share
    return _cf(dx)


def dropout_forward(x, p, training, rng):
    """Inverted dropout; identity in eval mode or when ``p == 0``."""
    if not 0.0 <= p < 1.0:
        raise InvalidInput(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x, None
    if x.ndim == 4:
        # draw in the channels-last memory order of the conv stack
        keep = _cf(rng.random(_cl(x).shape, dtype=np.float32) >= p)
    else:
        keep = rng.random(x.shape, dtype=np.float32) >= p
    scale = 1.0 / (1.0 - p)
    out = x * keep
    out *= scale
    return out, (keep, scale)


def dropout_backward(dout, cache):
    if cache is None:
        return dout
    keep, scale = cache
    dx = dout * keep
    dx *= scale
    return dx


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dout, mask):
    return dout * mask


def sigmoid(x):
    # split by sign so neither branch overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_forward(x):
    y = sigmoid(x)
    return y, y


def sigmoid_backward(dout, y):
    return dout * y * (1.0 - y)


def dense_forward(x, w, b):
    """Affine map over the last axis.  ``w`` is ``[D, K]``."""
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"dense: input {x.shape}, weight {w.shape}, bias {b.shape}")
    return x @ w + b, (x, w)


def dense_backward(dout, cache):
    x, w = cache
    d, k = w.shape
    dx = dout @ w.T
    dw = x.reshape(-1, d).T @ dout.reshape(-1, k)
    db = dout.reshape(-1, k).sum(axis=0)
    return dx, dw, db


# -- GRU -----------------------------------------------------------------------

def gru_forward(x, w_ih, w_hh, b):
    """One GRU direction over ``x [B, T, D]``.

    Gate rows of ``w_ih [3H, D]``, ``w_hh [3H, H]`` and ``b [3H]`` are ordered
    reset, update, candidate::

        r = sigmoid(W_ir x + b_r + W_hr h)
        z = sigmoid(W_iz x + b_z + W_hz h)
        n = tanh(W_in x + b_n + r * (W_hn h))
        h' = (1 - z) * n + z * h
    """
    bsz, t_len, d = x.shape
    hidden = w_hh.shape[1]
    if t_len == 0:
        raise InvalidInput("GRU input has no time steps")
    if w_ih.shape != (3 * hidden, d) or w_hh.shape != (3 * hidden, hidden) or b.shape != (3 * hidden,):
        raise ShapeError(f"GRU weights {w_ih.shape}, {w_hh.shape}, {b.shape} do not fit input width {d}")
    xi = x @ w_ih.T + b  # [B, T, 3H]
    h = np.zeros((bsz, hidden))
    hs = np.empty((bsz, t_len, hidden))
    rs = np.empty_like(hs)
    zs = np.empty_like(hs)
    ns = np.empty_like(hs)
    hns = np.empty_like(hs)
    h_prev = np.empty_like(hs)
    for step in range(t_len):
        hh = h @ w_hh.T
        r = sigmoid(xi[:, step, :hidden] + hh[:, :hidden])
        z = sigmoid(xi[:, step, hidden:2 * hidden] + hh[:, hidden:2 * hidden])
        hn = hh[:, 2 * hidden:]
        n = np.tanh(xi[:, step, 2 * hidden:] + r * hn)
        h_prev[:, step] = h
        h = (1.0 - z) * n + z * h
        hs[:, step] = h
        rs[:, step], zs[:, step], ns[:, step], hns[:, step] = r, z, n, hn
    return hs, (x, w_ih, w_hh, rs, zs, ns, hns, h_prev)


def gru_backward(dhs, cache):
    x, w_ih, w_hh, rs, zs, ns, hns, h_prev = cache
    bsz, t_len, hidden = dhs.shape
    dxi = np.empty((bsz, t_len, 3 * hidden))
    dw_hh = np.zeros_like(w_hh)
    dh_next = np.zeros((bsz, hidden))
    for step in reversed(range(t_len)):
        dh = dhs[:, step] + dh_next
        r, z, n, hn, hp = rs[:, step], zs[:, step], ns[:, step], hns[:, step], h_prev[:, step]
        dn = dh * (1.0 - z)
        dz = dh * (hp - n)
        da_n = dn * (1.0 - n * n)
        dr = da_n * hn
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dhh = np.concatenate([da_r, da_z, da_n * r], axis=1)
        dw_hh += dhh.T @ hp
        dh_next = dh * z + dhh @ w_hh
        dxi[:, step, :hidden] = da_r
        dxi[:, step, hidden:2 * hidden] = da_z
        dxi[:, step, 2 * hidden:] = da_n
    flat = dxi.reshape(-1, 3 * hidden)
    dw_ih = flat.T @ x.reshape(-1, x.shape[2])
    db = flat.sum(axis=0)
    dx = dxi @ w_ih
    return dx, dw_ih, dw_hh, db
