"""Independent brute-force oracles for detection and density results.

Everything here is deliberately naive: fine-grid cell enumeration instead of
interval arithmetic, direct formula evaluation instead of library calls.
The production code must agree with these, never the other way around.
"""

from __future__ import annotations

import math

import numpy as np

GRID_CELLS = 20000


def grid_empty_coverage(points: list[float], half_width: float, gap_lo: float,
                        gap_hi: float) -> float:
    """Fraction of (gap_lo, gap_hi) not covered by any inflated mark, by cell count."""
    if gap_hi <= gap_lo:
        return 0.0
    xs = gap_lo + (np.arange(GRID_CELLS) + 0.5) * (gap_hi - gap_lo) / GRID_CELLS
    pts = np.asarray(points, dtype=float)
    covered = (np.abs(xs[:, None] - pts[None, :]) <= half_width).any(axis=1)
    return float((~covered).mean())


def enumerate_bins(values: list[float], anchor: float, width: float) -> dict[int, int]:
    """Bin index -> count by direct per-value scan."""
    counts: dict[int, int] = {}
    for v in values:
        idx = math.floor((v - anchor) / width)
        counts[idx] = counts.get(idx, 0) + 1
    return counts


def zero_bin_coverage(values: list[float], anchor: float, width: float,
                      gap_lo: float, gap_hi: float) -> float:
    """Fraction of the gap covered by empty bins of the occupied partition span."""
    counts = enumerate_bins(values, anchor, width)
    occupied = sorted(counts)
    xs = gap_lo + (np.arange(GRID_CELLS) + 0.5) * (gap_hi - gap_lo) / GRID_CELLS
    idxs = np.floor((xs - anchor) / width).astype(int)
    inside = (idxs >= occupied[0]) & (idxs <= occupied[-1])
    empty = np.array([i not in counts for i in idxs])
    return float((inside & empty).mean())


def hand_quantile(values: list[float], q: float) -> float:
    """Sort-and-interpolate quantile, written out longhand."""
    s = sorted(values)
    pos = q * (len(s) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    frac = pos - lo
    return s[lo] + (s[hi] - s[lo]) * frac


def hand_fences(values: list[float]) -> tuple[float, float]:
    q1 = hand_quantile(values, 0.25)
    q3 = hand_quantile(values, 0.75)
    return q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)


def scan_gaps(values: list[float], gap_frac: float) -> list[tuple[float, float]]:
    s = sorted(set(values))
    if len(s) < 2:
        return []
    rng = s[-1] - s[0]
    return [(a, b) for a, b in zip(s, s[1:]) if b - a >= gap_frac * rng]


def mixture_density(x: float, centers: list[float], weights: list[float],
                    h: float) -> float:
    """Closed-form equal-bandwidth Gaussian mixture density."""
    total = 0.0
    for c, w in zip(centers, weights):
        total += w * math.exp(-0.5 * ((x - c) / h) ** 2) / (h * math.sqrt(2 * math.pi))
    return total


def count_local_maxima(ys: list[float]) -> int:
    """Strict interior local maxima of a sampled curve."""
    count = 0
    for i in range(1, len(ys) - 1):
        if ys[i] > ys[i - 1] and ys[i] > ys[i + 1]:
            count += 1
    return count


def min_provenance(instances) -> int:
    return min(len(inst.source_rows) for inst in instances)


# --- verdict oracles ---------------------------------------------------------------
# Strings, not enums: these must not import the module under test.

def worst(verdicts: list[str]) -> str:
    for v in ("Revealed", "Ambiguous", "Hidden"):
        if v in verdicts:
            return v
    return "Hidden"


def oracle_gap_points(values: list[float], size_frac: float, gap_frac: float,
                      overlap_frac: float, resolution: float) -> str:
    gaps = scan_gaps(values, gap_frac)
    if not gaps:
        return "Hidden"
    rng = max(values) - min(values)
    half = 0.5 * size_frac * rng
    verdicts = []
    for lo, hi in gaps:
        if hi - lo < resolution * rng:
            verdicts.append("Ambiguous")
            continue
        cov = grid_empty_coverage(values, half, lo, hi)
        if cov >= overlap_frac:
            verdicts.append("Revealed")
        elif cov > 0:
            verdicts.append("Ambiguous")
        else:
            verdicts.append("Hidden")
    return worst(verdicts)


def oracle_gap_bins(values: list[float], width: float, gap_frac: float,
                    overlap_frac: float) -> str:
    gaps = scan_gaps(values, gap_frac)
    if not gaps:
        return "Hidden"
    anchor = math.floor(min(values) / width) * width
    verdicts = []
    for lo, hi in gaps:
        if width >= 2.0 * (hi - lo):
            verdicts.append("Hidden")
            continue
        cov = zero_bin_coverage(values, anchor, width, lo, hi)
        verdicts.append("Revealed" if cov >= overlap_frac else "Ambiguous")
    return worst(verdicts)


def oracle_outlier_points(values: list[float], resolution: float) -> str:
    lo_f, hi_f = hand_fences(values)
    rng = max(values) - min(values)
    outliers = [v for v in values if v < lo_f or v > hi_f]
    inside = [v for v in values if lo_f <= v <= hi_f]
    if not outliers:
        return "Hidden"
    verdicts = []
    for o in outliers:
        sep = min((abs(o - u) for u in inside), default=float("inf"))
        verdicts.append("Revealed" if sep / rng >= resolution else "Ambiguous")
    return worst(verdicts)


def oracle_outlier_bins(values: list[float], width: float) -> str:
    lo_f, hi_f = hand_fences(values)
    out_rows = {i for i, v in enumerate(values) if v < lo_f or v > hi_f}
    if not out_rows:
        return "Hidden"
    anchor = math.floor(min(values) / width) * width
    bins: dict[int, set[int]] = {}
    for i, v in enumerate(values):
        bins.setdefault(math.floor((v - anchor) / width), set()).add(i)
    verdicts = []
    for idx, members in bins.items():
        if not (members & out_rows):
            continue
        others = [j for j in bins if j != idx]
        if not others:
            continue
        dist = min(abs(idx - j) for j in others)
        if dist >= 2:
            verdicts.append("Revealed")
        elif not (members - out_rows):
            verdicts.append("Ambiguous")
    return worst(verdicts) if verdicts else "Hidden"


def oracle_individual(spec_dict: dict, relevant: list[str], values: list[float],
                      width: float | None, groups: list[str] | None,
                      k_safe: int) -> str:
    for enc in spec_dict["encoding"].values():
        if enc.get("field") in relevant and "bin" not in enc \
                and enc.get("aggregate") is None:
            return "Revealed"
    if width is not None:
        anchor = math.floor(min(values) / width) * width
        counts = enumerate_bins(values, anchor, width)
        k_star = min(counts.values())
    elif groups is not None:
        tally: dict[str, int] = {}
        for g in groups:
            tally[g] = tally.get(g, 0) + 1
        k_star = min(tally.values())
    else:
        k_star = 1  # one mark per record
    if k_star >= k_safe:
        return "Hidden"
    return "Ambiguous"
