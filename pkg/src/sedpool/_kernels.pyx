# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for postprocessing and intersection matching.

Signatures and results are identical to :mod:`sedpool._kernels_py`.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def median_filter_binary(x, Py_ssize_t window):
    cdef const unsigned char[::1] src = np.ascontiguousarray(x, dtype=np.uint8)
    cdef Py_ssize_t n = src.shape[0]
    cdef Py_ssize_t half = window // 2
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t i, count = 0
    if n == 0:
        return out_arr
    # running count of ones over [i - half, i + half]; outside the signal counts as 0
    for i in range(min(half, n)):
        count += src[i]
    for i in range(n):
        if i + half < n:
            count += src[i + half]
        if i - half - 1 >= 0:
            count -= src[i - half - 1]
        out[i] = 1 if count > half else 0
    return out_arr


def binary_runs(x):
    cdef const unsigned char[::1] src = np.ascontiguousarray(x, dtype=np.uint8)
    cdef Py_ssize_t n = src.shape[0]
    starts_arr = np.empty(n // 2 + 1, dtype=np.int64)
    ends_arr = np.empty(n // 2 + 1, dtype=np.int64)
    cdef long long[::1] starts = starts_arr
    cdef long long[::1] ends = ends_arr
    cdef Py_ssize_t i, k = 0
    cdef bint inside = False
    for i in range(n):
        if src[i]:
            if not inside:
                starts[k] = i
                inside = True
        elif inside:
            ends[k] = i - 1
            k += 1
            inside = False
    if inside:
        ends[k] = n - 1
        k += 1
    return starts_arr[:k].copy(), ends_arr[:k].copy()


def intersection_matrix(a_on, a_off, b_on, b_off):
    cdef const double[::1] aon = np.ascontiguousarray(a_on, dtype=np.float64)
    cdef const double[::1] aoff = np.ascontiguousarray(a_off, dtype=np.float64)
    cdef const double[::1] bon = np.ascontiguousarray(b_on, dtype=np.float64)
    cdef const double[::1] boff = np.ascontiguousarray(b_off, dtype=np.float64)
    cdef Py_ssize_t na = aon.shape[0], nb = bon.shape[0]
    out_arr = np.zeros((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double lo, hi
    for i in range(na):
        for j in range(nb):
            lo = aon[i] if aon[i] > bon[j] else bon[j]
            hi = aoff[i] if aoff[i] < boff[j] else boff[j]
            if hi > lo:
                out[i, j] = hi - lo
    return out_arr


def im2col3x3(x):
    cdef const double[:, :, :, ::1] src = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t bsz = src.shape[0], t = src.shape[1], f = src.shape[2], c = src.shape[3]
    cols_arr = np.empty((bsz * t * f, 9 * c), dtype=np.float64)
    cdef double[:, ::1] cols = cols_arr
    cdef Py_ssize_t b, i, j, di, dj, ch, row = 0, col, ti, fj
    with nogil:
        for b in range(bsz):
            for i in range(t):
                for j in range(f):
                    col = 0
                    for di in range(3):
                        ti = i + di - 1
                        for dj in range(3):
                            fj = j + dj - 1
                            if 0 <= ti < t and 0 <= fj < f:
                                for ch in range(c):
                                    cols[row, col + ch] = src[b, ti, fj, ch]
                            else:
                                for ch in range(c):
                                    cols[row, col + ch] = 0.0
                            col += c
                    row += 1
    return cols_arr


def col2im3x3(dcols, shape):
    cdef const double[:, ::1] src = np.ascontiguousarray(dcols, dtype=np.float64)
    cdef Py_ssize_t bsz = shape[0], t = shape[1], f = shape[2], c = shape[3]
    out_arr = np.zeros((bsz, t, f, c), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, di, dj, ch, row = 0, col, ti, fj
    with nogil:
        for b in range(bsz):
            for i in range(t):
                for j in range(f):
                    col = 0
                    for di in range(3):
                        ti = i + di - 1
                        for dj in range(3):
                            fj = j + dj - 1
                            if 0 <= ti < t and 0 <= fj < f:
                                for ch in range(c):
                                    out[b, ti, fj, ch] += src[row, col + ch]
                            col += c
                    row += 1
    return out_arr
