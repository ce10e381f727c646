# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the numeric kernels (see _fallback.py for the contract)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, floor, sqrt

cnp.import_array()

cdef double SQRT_2PI = sqrt(2.0 * 3.141592653589793)


def quantile_sorted(double[:] values, double q):
    cdef Py_ssize_t n = values.shape[0]
    if n == 1:
        return float(values[0])
    cdef double pos = q * (n - 1)
    cdef Py_ssize_t lo = <Py_ssize_t>floor(pos)
    if lo >= n - 1:
        return float(values[n - 1])
    cdef double frac = pos - lo
    cdef double a = values[lo]
    cdef double b = values[lo + 1]
    # a + frac*(b-a) clamped into [a, b]: monotone in q despite fp rounding
    cdef double out = a + frac * (b - a)
    if out < a:
        out = a
    if out > b:
        out = b
    return float(out)


def gaussian_kde(double[:] values, double bandwidth, double[:] grid):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = grid.shape[0]
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i, j
    cdef double z, acc, g
    for j in range(m):
        g = grid[j]
        acc = 0.0
        for i in range(n):
            z = (g - values[i]) / bandwidth
            acc += exp(-0.5 * z * z)
        out[j] = acc / (n * bandwidth * SQRT_2PI)
    return out_arr


def bin_counts(double[:] values, double anchor, double width, Py_ssize_t n_bins,
               bint clamp_last=False):
    out_arr = np.zeros(n_bins, dtype=np.int64)
    cdef long long[:] out = out_arr
    cdef Py_ssize_t i, idx
    for i in range(values.shape[0]):
        idx = <Py_ssize_t>floor((values[i] - anchor) / width)
        if clamp_last and idx >= n_bins:
            idx = n_bins - 1
        if 0 <= idx < n_bins:
            out[idx] += 1
    return out_arr


def gap_scan(double[:] sorted_values, double min_width):
    cdef Py_ssize_t n = sorted_values.shape[0]
    if n < 2:
        return np.empty((0, 2), dtype=np.float64)
    cdef Py_ssize_t i, count = 0
    for i in range(n - 1):
        if sorted_values[i + 1] - sorted_values[i] >= min_width:
            count += 1
    out_arr = np.empty((count, 2), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t k = 0
    for i in range(n - 1):
        if sorted_values[i + 1] - sorted_values[i] >= min_width:
            out[k, 0] = sorted_values[i]
            out[k, 1] = sorted_values[i + 1]
            k += 1
    return out_arr


def trapezoid(double[:] y, double[:] x):
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0] - 1):
        acc += 0.5 * (y[i] + y[i + 1]) * (x[i + 1] - x[i])
    return float(acc)
