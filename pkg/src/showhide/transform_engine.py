"""Evaluates a ChartSpec against a Dataset into a RenderedView.

Every disclosure tactic is applied deterministically: transforms in listed
order, then encoding-level aggregate/bin, then one mark instance per
resulting record. Source-row provenance is threaded through every step so
the rubric can reason about what a mark exposes.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import kernels
from .chart_spec import (
    Aggregate,
    Band,
    ChartSpec,
    Classify,
    Derive,
    Encoding,
    Filter,
    MarkParams,
    MarkType,
    Smooth,
    Subsample,
    Transform,
    eval_derive_expr,
    parse_derive_expr,
    transform_to_dict,
)
from .data_model import Dataset, Domain
from .errors import DegenerateInputError, EmptyInputError, EvalError
from .utils import canonical_hash


# --- scalar building blocks -----------------------------------------------------

@dataclass(frozen=True, order=True)
class Interval:
    """A half-open bin or band [lo, hi); ordering follows the partition index."""

    index: int
    lo: float
    hi: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def label(self) -> str:
        return f"[{self.lo:g}, {self.hi:g})"

    def to_dict(self) -> dict:
        return {"index": self.index, "lo": self.lo, "hi": self.hi}


def quantile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile at position q*(n-1)."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    vals = [v for v in values if v is not None]
    if not vals:
        raise EmptyInputError("quantile of empty input")
    arr = np.sort(np.asarray(vals, dtype=np.float64))
    return kernels.quantile_sorted(arr, q)


def tukey_fences(values: Sequence[float]) -> tuple[float, float]:
    """(q1 - 1.5*IQR, q3 + 1.5*IQR) with the linear-interpolation quantile."""
    q1 = quantile(values, 0.25)
    q3 = quantile(values, 0.75)
    iqr = q3 - q1
    return q1 - 1.5 * iqr, q3 + 1.5 * iqr


def silverman_bandwidth(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=np.float64)
    sigma = float(np.std(arr))
    iqr = quantile(values, 0.75) - quantile(values, 0.25)
    a = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    if a <= 0:
        raise DegenerateInputError("all values equal")
    return 0.9 * a * len(arr) ** (-0.2)


@dataclass(frozen=True)
class DensityCurve:
    grid: tuple[float, ...]
    density: tuple[float, ...]
    bandwidth: float

    def to_dict(self) -> dict:
        return {"grid": list(self.grid), "density": list(self.density),
                "bandwidth": self.bandwidth}


def kde(values: Sequence[float], bandwidth: float | None = None,
        grid_n: int = 64) -> DensityCurve:
    """Gaussian KDE on a uniform grid spanning [min - 3h, max + 3h].

    Default bandwidth is Silverman's rule; the returned curve is normalized
    so its trapezoidal integral is 1.
    """
    if grid_n < 16:
        raise ValueError("grid_n must be >= 16")
    vals = [v for v in values if v is not None]
    if len(set(vals)) < 2:
        raise DegenerateInputError("kde needs at least 2 distinct values")
    arr = np.asarray(vals, dtype=np.float64)
    h = bandwidth if bandwidth is not None else silverman_bandwidth(vals)
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    lo = float(arr.min()) - 3.0 * h
    hi = float(arr.max()) + 3.0 * h
    grid = np.linspace(lo, hi, grid_n)
    density = kernels.gaussian_kde(arr, h, grid)
    integral = kernels.trapezoid(density, grid)
    density = density / integral
    return DensityCurve(grid=tuple(float(g) for g in grid),
                        density=tuple(float(d) for d in density),
                        bandwidth=float(h))


# --- working frame -----------------------------------------------------------------

@dataclass
class _ColumnInfo:
    kind: str                      # quantitative | categorical | interval
    sources: frozenset[str]        # original dataset fields feeding this column
    raw: bool                      # untransformed source values?
    op: str | None = None          # aggregate op / bin / band / derive / smooth_grid / density
    bin_width: float | None = None
    bandwidth: float | None = None


@dataclass
class _Frame:
    columns: dict[str, list[Any]]
    info: dict[str, _ColumnInfo]
    provenance: list[frozenset[int]]

    @property
    def n(self) -> int:
        return len(self.provenance)

    def column(self, name: str) -> list[Any]:
        if name not in self.columns:
            raise EvalError("resolve", f"unknown field {name!r}")
        return self.columns[name]

    def take(self, idx: Sequence[int]) -> "_Frame":
        return _Frame(
            columns={k: [v[i] for i in idx] for k, v in self.columns.items()},
            info=dict(self.info),
            provenance=[self.provenance[i] for i in idx],
        )


def _frame_from_dataset(dataset: Dataset) -> _Frame:
    columns: dict[str, list[Any]] = {}
    info: dict[str, _ColumnInfo] = {}
    for fs in dataset.schema:
        columns[fs.name] = dataset.column(fs.name)
        kind = "quantitative" if fs.is_quantitative else "categorical"
        info[fs.name] = _ColumnInfo(kind=kind, sources=frozenset([fs.name]), raw=True)
    provenance = [frozenset([i]) for i in range(dataset.n_rows)]
    return _Frame(columns=columns, info=info, provenance=provenance)


# --- binning helpers ----------------------------------------------------------------

def width_partition(lo: float, hi: float, width: float) -> tuple[float, int]:
    """Anchor and bin count for width-based bins aligned to multiples of width."""
    anchor = math.floor(lo / width) * width
    n_bins = int(math.floor(hi / width)) - int(math.floor(lo / width)) + 1
    return anchor, n_bins


def assign_width_bin(v: float, anchor: float, width: float) -> int:
    return int(math.floor((v - anchor) / width))


def make_intervals(values: Sequence[float | None], width: float | None,
                   count: int | None) -> list[Interval | None]:
    """Interval per value; bins partition [min, max] of the non-null values."""
    present = [v for v in values if v is not None]
    if not present:
        return [None] * len(values)
    lo, hi = min(present), max(present)
    out: list[Interval | None] = []
    if width is not None:
        anchor, _ = width_partition(lo, hi, width)
        for v in values:
            if v is None:
                out.append(None)
            else:
                idx = assign_width_bin(v, anchor, width)
                out.append(Interval(index=idx, lo=anchor + idx * width,
                                    hi=anchor + (idx + 1) * width))
    else:
        span = hi - lo
        if span == 0:
            for v in values:
                out.append(None if v is None else Interval(index=0, lo=lo, hi=hi))
            return out
        w = span / count
        # the last edge is pinned to hi so the partition covers [lo, hi] exactly
        edges = [lo + k * w for k in range(count)] + [hi]
        for v in values:
            if v is None:
                out.append(None)
            else:
                idx = min(count - 1, int(math.floor((v - lo) / w)))
                out.append(Interval(index=idx, lo=edges[idx], hi=edges[idx + 1]))
    return out


def band_intervals(values: Sequence[float | None], cutpoints: Sequence[float] | None,
                   quantiles: int | None) -> list[Interval | None]:
    present = [v for v in values if v is not None]
    if not present:
        return [None] * len(values)
    if cutpoints is None:
        cuts = [quantile(present, i / quantiles) for i in range(1, quantiles)]
        # duplicate quantiles collapse to one cutpoint
        cuts = sorted(set(cuts))
    else:
        cuts = list(cutpoints)
    lo = min(min(present), cuts[0]) if cuts else min(present)
    hi = max(max(present), cuts[-1]) if cuts else max(present)
    edges = [lo] + cuts + [hi]
    out: list[Interval | None] = []
    for v in values:
        if v is None:
            out.append(None)
            continue
        idx = 0
        for k, c in enumerate(cuts):
            if v >= c:
                idx = k + 1
        out.append(Interval(index=idx, lo=edges[idx], hi=edges[idx + 1]))
    return out


# --- transform application -----------------------------------------------------------

def _apply_aggregate(frame: _Frame, t: Aggregate) -> _Frame:
    keys: list[tuple] = []
    groups: dict[tuple, list[int]] = {}
    for i in range(frame.n):
        key = tuple(frame.columns[g][i] for g in t.groupby)
        if key not in groups:
            groups[key] = []
            keys.append(key)
        groups[key].append(i)

    columns: dict[str, list[Any]] = {g: [] for g in t.groupby}
    for o in t.ops:
        columns[o.out] = []
    provenance: list[frozenset[int]] = []
    for key in keys:
        idx = groups[key]
        for g, kv in zip(t.groupby, key):
            columns[g].append(kv)
        for o in t.ops:
            if o.op == "count":
                columns[o.out].append(float(len(idx)))
                continue
            vals = [frame.columns[o.field][i] for i in idx]
            vals = [v for v in vals if v is not None]
            if not vals:
                columns[o.out].append(None)  # all-null group kept, null measure
            elif o.op == "sum":
                columns[o.out].append(float(sum(vals)))
            elif o.op == "mean":
                columns[o.out].append(float(sum(vals)) / len(vals))
            elif o.op == "median":
                columns[o.out].append(quantile(vals, 0.5))
            elif o.op == "min":
                columns[o.out].append(min(vals))
            elif o.op == "max":
                columns[o.out].append(max(vals))
        merged: set[int] = set()
        for i in idx:
            merged |= frame.provenance[i]
        provenance.append(frozenset(merged))

    info: dict[str, _ColumnInfo] = {g: frame.info[g] for g in t.groupby}
    for o in t.ops:
        sources = frame.info[o.field].sources if o.field else frozenset()
        info[o.out] = _ColumnInfo(kind="quantitative", sources=sources, raw=False, op=o.op)
    return _Frame(columns=columns, info=info, provenance=provenance)


def _apply_subsample(frame: _Frame, t: Subsample) -> _Frame:
    n = frame.n
    if t.n is not None:
        k = min(t.n, n)
    else:
        k = min(n, max(1, int(round(t.fraction * n))))
    rng = random.Random(t.seed)
    chosen = sorted(rng.sample(range(n), k))
    return frame.take(chosen)


def _apply_filter(frame: _Frame, t: Filter) -> _Frame:
    col = frame.column(t.field)
    keep: list[int] = []
    for i, v in enumerate(col):
        if v is None:
            continue
        if isinstance(v, str) or isinstance(t.value, str):
            if t.cmp not in ("==", "!="):
                raise EvalError("filter", f"comparator {t.cmp} needs numeric operands")
            ok = (v == t.value) if t.cmp == "==" else (v != t.value)
        else:
            ok = {"==": v == t.value, "!=": v != t.value, "<": v < t.value,
                  "<=": v <= t.value, ">": v > t.value, ">=": v >= t.value}[t.cmp]
        if ok:
            keep.append(i)
    return frame.take(keep)


def _apply_smooth(frame: _Frame, t: Smooth) -> _Frame:
    values = [v for v in frame.column(t.field) if v is not None]
    curve = kde(values, bandwidth=t.bandwidth, grid_n=t.grid_n)
    spacing = curve.grid[1] - curve.grid[0]
    reach = 3.0 * curve.bandwidth + 0.5 * spacing
    rows_by_value: list[tuple[float, frozenset[int]]] = []
    for i, v in enumerate(frame.column(t.field)):
        if v is not None:
            rows_by_value.append((v, frame.provenance[i]))

    provenance: list[frozenset[int]] = []
    for g in curve.grid:
        contributing: set[int] = set()
        for v, prov in rows_by_value:
            if abs(v - g) <= reach:
                contributing |= prov
        provenance.append(frozenset(contributing))

    columns = {t.field: list(curve.grid), "density": list(curve.density)}
    sources = frame.info[t.field].sources
    info = {
        t.field: _ColumnInfo(kind="quantitative", sources=sources, raw=False,
                             op="smooth_grid", bin_width=spacing,
                             bandwidth=curve.bandwidth),
        "density": _ColumnInfo(kind="quantitative", sources=sources, raw=False,
                               op="density", bandwidth=curve.bandwidth),
    }
    return _Frame(columns=columns, info=info, provenance=provenance)


def _apply_transform(frame: _Frame, t: Transform) -> _Frame:
    if isinstance(t, Aggregate):
        return _apply_aggregate(frame, t)
    if isinstance(t, Classify):
        col = frame.column(t.field)
        intervals = make_intervals(col, t.width, t.count)
        widths = [iv.width for iv in intervals if iv is not None]
        frame.columns[t.out] = intervals
        frame.info[t.out] = _ColumnInfo(
            kind="interval", sources=frame.info[t.field].sources, raw=False, op="bin",
            bin_width=widths[0] if widths else None)
        return frame
    if isinstance(t, Band):
        col = frame.column(t.field)
        intervals = band_intervals(col, t.cutpoints, t.quantiles)
        frame.columns[t.out] = intervals
        frame.info[t.out] = _ColumnInfo(
            kind="interval", sources=frame.info[t.field].sources, raw=False, op="band")
        return frame
    if isinstance(t, Derive):
        refs = parse_derive_expr(t.expr)
        sources: set[str] = set()
        for r in refs:
            sources |= frame.info[r].sources if r in frame.info else {r}
        out: list[float | None] = []
        for i in range(frame.n):
            env = {r: frame.columns[r][i] if r in frame.columns else None for r in refs}
            out.append(eval_derive_expr(t.expr, env))
        frame.columns[t.out] = out
        frame.info[t.out] = _ColumnInfo(kind="quantitative", sources=frozenset(sources),
                                        raw=False, op="derive")
        return frame
    if isinstance(t, Subsample):
        return _apply_subsample(frame, t)
    if isinstance(t, Filter):
        return _apply_filter(frame, t)
    if isinstance(t, Smooth):
        return _apply_smooth(frame, t)
    raise EvalError("transform", f"unsupported transform {t!r}")


# --- rendered view --------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelInfo:
    """What a channel carries: the column, its lineage, and how it was made."""

    channel: str
    field: str | None
    kind: str                      # quantitative | categorical | interval
    aggregate: str | None          # count/sum/mean/median/min/max/density
    op: str | None                 # producing operation (bin, band, derive, smooth_grid, ...)
    bin_width: float | None
    bandwidth: float | None
    sources: frozenset[str]
    raw: bool

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "field": self.field,
            "kind": self.kind,
            "aggregate": self.aggregate,
            "op": self.op,
            "bin_width": self.bin_width,
            "bandwidth": self.bandwidth,
            "sources": sorted(self.sources),
            "raw": self.raw,
        }


@dataclass(frozen=True)
class MarkInstance:
    channel_values: dict[str, Any]
    source_rows: frozenset[int]
    derived_stats: dict[str, Any] | None = None

    def value(self, channel: str) -> Any:
        return self.channel_values.get(channel)

    def to_dict(self, provenance: str = "full") -> dict:
        cv = {}
        for ch, v in self.channel_values.items():
            cv[ch] = v.to_dict() if isinstance(v, Interval) else v
        d: dict[str, Any] = {"channels": cv}
        if provenance == "sizes":
            d["provenance_size"] = len(self.source_rows)
        else:
            d["source_rows"] = sorted(self.source_rows)
        if self.derived_stats is not None:
            d["derived_stats"] = dict(self.derived_stats)
        return d


@dataclass(frozen=True)
class RenderedView:
    mark: MarkType
    mark_params: MarkParams
    instances: tuple[MarkInstance, ...]
    domains: dict[str, Domain]
    pipeline_echo: tuple[Transform, ...]
    channel_info: dict[str, ChannelInfo]

    def channel_values(self, channel: str) -> list[Any]:
        return [inst.value(channel) for inst in self.instances]

    def to_dict(self, provenance: str = "full") -> dict:
        return {
            "mark": self.mark.value,
            "mark_params": {
                "size": self.mark_params.size,
                "opacity": self.mark_params.opacity,
                "interpolation": self.mark_params.interpolation,
                "show_outlier_points": self.mark_params.show_outlier_points,
            },
            "instances": [i.to_dict(provenance) for i in self.instances],
            "domains": {ch: d.to_dict() for ch, d in self.domains.items()},
            "pipeline_echo": [transform_to_dict(t) for t in self.pipeline_echo],
            "channels": {ch: ci.to_dict() for ch, ci in self.channel_info.items()},
        }

    def content_hash(self) -> str:
        return canonical_hash(self.to_dict(provenance="full"))


def _channel_domain(values: list[Any]) -> Domain | None:
    nums: list[float] = []
    cats: list[str] = []
    for v in values:
        if v is None:
            continue
        if isinstance(v, Interval):
            nums.extend((v.lo, v.hi))
        elif isinstance(v, str):
            cats.append(v)
        else:
            nums.append(float(v))
    if cats:
        seen: dict[str, None] = {}
        for c in cats:
            seen.setdefault(c, None)
        return Domain(categories=tuple(seen))
    if nums:
        return Domain(lo=min(nums), hi=max(nums))
    return None


def _sort_key(value: Any) -> tuple:
    if value is None:
        return (3, 0)
    if isinstance(value, Interval):
        return (0, value.index)
    if isinstance(value, str):
        return (2, value)
    return (0, value)


def evaluate(spec: ChartSpec, dataset: Dataset) -> RenderedView:
    """Run the full pipeline; call validate_spec first for friendly errors."""
    frame = _frame_from_dataset(dataset)
    for t in spec.transforms:
        frame = _apply_transform(frame, t)

    # encoding-level bin, then aggregate
    channel_columns: dict[str, list[Any]] = {}
    channel_infos: dict[str, ChannelInfo] = {}
    aggregated: list[Encoding] = []
    plain: list[Encoding] = []
    for enc in spec.encodings:
        if enc.aggregate is not None:
            aggregated.append(enc)
            continue
        col = frame.column(enc.field)
        ci = frame.info[enc.field]
        if enc.bin is not None:
            intervals = make_intervals(col, enc.bin.width, enc.bin.count)
            widths = [iv.width for iv in intervals if iv is not None]
            channel_columns[enc.channel] = intervals
            channel_infos[enc.channel] = ChannelInfo(
                channel=enc.channel, field=enc.field, kind="interval", aggregate=None,
                op="bin", bin_width=widths[0] if widths else None, bandwidth=None,
                sources=ci.sources, raw=False)
        else:
            channel_columns[enc.channel] = col
            channel_infos[enc.channel] = ChannelInfo(
                channel=enc.channel, field=enc.field, kind=ci.kind, aggregate=ci.op
                if ci.op in ("count", "sum", "mean", "median", "min", "max", "density") else None,
                op=ci.op, bin_width=ci.bin_width, bandwidth=ci.bandwidth,
                sources=ci.sources, raw=ci.raw)
        plain.append(enc)

    instances: list[MarkInstance] = []
    if aggregated:
        keys: list[tuple] = []
        groups: dict[tuple, list[int]] = {}
        for i in range(frame.n):
            key = tuple(channel_columns[e.channel][i] for e in plain)
            if key not in groups:
                groups[key] = []
                keys.append(key)
            groups[key].append(i)
        for enc in aggregated:
            ci_sources = (frame.info[enc.field].sources if enc.field else frozenset())
            channel_infos[enc.channel] = ChannelInfo(
                channel=enc.channel, field=enc.field, kind="quantitative",
                aggregate=enc.aggregate, op=enc.aggregate, bin_width=None,
                bandwidth=None, sources=ci_sources, raw=False)
        for key in keys:
            idx = groups[key]
            if any(k is None for k in key):
                continue  # rows null in a grouping channel are not rendered
            cv: dict[str, Any] = {e.channel: k for e, k in zip(plain, key)}
            for enc in aggregated:
                if enc.aggregate == "count":
                    cv[enc.channel] = float(len(idx))
                else:
                    vals = [frame.columns[enc.field][i] for i in idx]
                    vals = [v for v in vals if v is not None]
                    if not vals:
                        cv[enc.channel] = None
                    elif enc.aggregate == "sum":
                        cv[enc.channel] = float(sum(vals))
                    elif enc.aggregate == "mean":
                        cv[enc.channel] = float(sum(vals)) / len(vals)
                    elif enc.aggregate == "median":
                        cv[enc.channel] = quantile(vals, 0.5)
                    elif enc.aggregate == "min":
                        cv[enc.channel] = min(vals)
                    elif enc.aggregate == "max":
                        cv[enc.channel] = max(vals)
            merged: set[int] = set()
            for i in idx:
                merged |= frame.provenance[i]
            instances.append(MarkInstance(channel_values=cv, source_rows=frozenset(merged)))
    elif spec.mark == MarkType.BOXPLOT:
        instances = _boxplot_instances(spec, frame, channel_columns, channel_infos)
    else:
        for i in range(frame.n):
            cv = {e.channel: channel_columns[e.channel][i] for e in plain}
            if any(v is None for v in cv.values()):
                continue  # null in an encoded channel: mark not rendered
            instances.append(MarkInstance(channel_values=cv,
                                          source_rows=frame.provenance[i]))

    if spec.mark in (MarkType.LINE, MarkType.TRAIL, MarkType.AREA):
        instances.sort(key=lambda inst: _sort_key(inst.value("x")))

    domains: dict[str, Domain] = {}
    for ch in channel_infos:
        dom = _channel_domain([inst.value(ch) for inst in instances])
        if dom is not None:
            domains[ch] = dom

    if spec.mark == MarkType.BOXPLOT and instances:
        # the value axis must span the whisker fences, not just the medians
        stats = [inst.derived_stats for inst in instances if inst.derived_stats]
        if stats:
            lo = min(s["lower_fence"] for s in stats)
            hi = max(s["upper_fence"] for s in stats)
            for ch, ci in channel_infos.items():
                if ci.kind == "quantitative" and ch in domains:
                    domains[ch] = Domain(lo=min(domains[ch].lo, lo),
                                         hi=max(domains[ch].hi, hi))

    return RenderedView(
        mark=spec.mark,
        mark_params=spec.mark_params,
        instances=tuple(instances),
        domains=domains,
        pipeline_echo=tuple(spec.transforms),
        channel_info=channel_infos,
    )


def _boxplot_instances(spec: ChartSpec, frame: _Frame,
                       channel_columns: dict[str, list[Any]],
                       channel_infos: dict[str, ChannelInfo]) -> list[MarkInstance]:
    value_channel = None
    for ch in ("x", "y"):
        ci = channel_infos.get(ch)
        if ci is not None and ci.kind == "quantitative":
            value_channel = ch
            break
    if value_channel is None:
        raise EvalError("boxplot", "no quantitative positional channel")
    group_channels = [ch for ch in channel_infos if ch != value_channel]

    keys: list[tuple] = []
    groups: dict[tuple, list[int]] = {}
    for i in range(frame.n):
        key = tuple(channel_columns[ch][i] for ch in group_channels)
        if key not in groups:
            groups[key] = []
            keys.append(key)
        groups[key].append(i)

    instances = []
    for key in keys:
        if any(k is None for k in key):
            continue
        idx = [i for i in groups[key] if channel_columns[value_channel][i] is not None]
        if not idx:
            continue
        vals = [channel_columns[value_channel][i] for i in idx]
        q1 = quantile(vals, 0.25)
        med = quantile(vals, 0.5)
        q3 = quantile(vals, 0.75)
        lo_fence, hi_fence = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
        outlier_rows: list[int] = []
        for i in idx:
            v = channel_columns[value_channel][i]
            if v < lo_fence or v > hi_fence:
                outlier_rows.extend(sorted(frame.provenance[i]))
        merged: set[int] = set()
        for i in idx:
            merged |= frame.provenance[i]
        cv = {ch: k for ch, k in zip(group_channels, key)}
        cv[value_channel] = med
        instances.append(MarkInstance(
            channel_values=cv,
            source_rows=frozenset(merged),
            derived_stats={"q1": q1, "median": med, "q3": q3,
                           "lower_fence": lo_fence, "upper_fence": hi_fence,
                           "outliers": sorted(set(outlier_rows))},
        ))
    return instances
