"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def median_filter_binary(x, window):
    x = np.ascontiguousarray(x, dtype=np.uint8)
    n = x.shape[0]
    half = window // 2
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    csum = np.concatenate(([0], np.cumsum(np.pad(x.astype(np.int64), half))))
    counts = csum[window:window + n] - csum[:n]
    return (counts > half).astype(np.uint8)


def binary_runs(x):
    x = np.ascontiguousarray(x, dtype=np.int8)
    edges = np.diff(np.concatenate(([0], x, [0])))
    starts = np.flatnonzero(edges == 1).astype(np.int64)
    ends = np.flatnonzero(edges == -1).astype(np.int64) - 1
    return starts, ends


def intersection_matrix(a_on, a_off, b_on, b_off):
    a_on = np.asarray(a_on, dtype=np.float64)[:, None]
    a_off = np.asarray(a_off, dtype=np.float64)[:, None]
    b_on = np.asarray(b_on, dtype=np.float64)[None, :]
    b_off = np.asarray(b_off, dtype=np.float64)[None, :]
    return np.maximum(np.minimum(a_off, b_off) - np.maximum(a_on, b_on), 0.0)


_TAPS = [(i, j) for i in range(3) for j in range(3)]


def im2col3x3(x):
    x = np.asarray(x, dtype=np.float64)
    bsz, t, f, c = x.shape
    xp = np.zeros((bsz, t + 2, f + 2, c))
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.empty((bsz, t, f, 9, c))
    for k, (i, j) in enumerate(_TAPS):
        cols[:, :, :, k, :] = xp[:, i:i + t, j:j + f, :]
    return cols.reshape(-1, 9 * c)


def col2im3x3(dcols, shape):
    bsz, t, f, c = shape
    dcols = np.asarray(dcols, dtype=np.float64).reshape(bsz, t, f, 9, c)
    dxp = np.zeros((bsz, t + 2, f + 2, c))
    for k, (i, j) in enumerate(_TAPS):
        dxp[:, i:i + t, j:j + f, :] += dcols[:, :, :, k, :]
    return np.ascontiguousarray(dxp[:, 1:-1, 1:-1, :])
