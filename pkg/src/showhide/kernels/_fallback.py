"""Pure-numpy implementations of the numeric kernels.

Used when the Cython extension is unavailable (or forced via
SHOWHIDE_PURE_PYTHON=1). Must stay semantically identical to _native.pyx;
tests run the full suite against both backends.
"""

from __future__ import annotations

import math

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)


def quantile_sorted(values: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile at position q*(n-1) of a sorted array."""
    n = values.shape[0]
    if n == 1:
        return float(values[0])
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    if lo >= n - 1:
        return float(values[n - 1])
    frac = pos - lo
    a, b = float(values[lo]), float(values[lo + 1])
    # a + frac*(b-a) clamped into [a, b]: monotone in q despite fp rounding
    return min(max(a + frac * (b - a), a), b)


def gaussian_kde(values: np.ndarray, bandwidth: float, grid: np.ndarray) -> np.ndarray:
    """Unnormalized Gaussian KDE of `values` evaluated at `grid` points."""
    n = values.shape[0]
    z = (grid[None, :] - values[:, None]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=0)
    return dens / (n * bandwidth * SQRT_2PI)


def bin_counts(values: np.ndarray, anchor: float, width: float, n_bins: int,
               clamp_last: bool = False) -> np.ndarray:
    """Histogram counts for half-open bins [anchor + k*width, anchor + (k+1)*width)."""
    idx = np.floor((values - anchor) / width).astype(np.int64)
    if clamp_last:
        idx = np.minimum(idx, n_bins - 1)
    counts = np.zeros(n_bins, dtype=np.int64)
    valid = (idx >= 0) & (idx < n_bins)
    np.add.at(counts, idx[valid], 1)
    return counts


def gap_scan(sorted_values: np.ndarray, min_width: float) -> np.ndarray:
    """Maximal empty intervals of width >= min_width between consecutive values.

    Returns an (m, 2) array of (lo, hi) pairs.
    """
    if sorted_values.shape[0] < 2:
        return np.empty((0, 2), dtype=np.float64)
    diffs = np.diff(sorted_values)
    hit = np.nonzero(diffs >= min_width)[0]
    out = np.empty((hit.shape[0], 2), dtype=np.float64)
    out[:, 0] = sorted_values[hit]
    out[:, 1] = sorted_values[hit + 1]
    return out


def trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.trapezoid(y, x))
