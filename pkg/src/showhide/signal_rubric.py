"""Signal disclosure rubric: ground truth, per-mark detection, scorecards.

Ground truth extracts each signal directly from the raw data; detection
inspects a rendered view (marks, channels, provenance, pipeline echo) and
returns Revealed / Ambiguous / Hidden with a full measurement trace. The
adherence mapping turns verdicts into satisfied / risked / broken, with the
information need treated as the negation of a disclosure constraint.

Every qualitative judgment ("substantial span", "clearly separated") is a
numeric threshold housed in RubricParams and surfaced in the trace, so a
grader can see exactly which comparison produced a verdict and override it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Any, Sequence

import numpy as np
from scipy.signal import find_peaks

from .chart_spec import Aggregate, ChartSpec, MarkType, TacticKind, tactics_used, validate_spec
from .data_model import Dataset, SignalBinding, SignalKind, field_domain
from .errors import DatasetMismatchError, DegenerateDataError, EvalError
from .transform_engine import (
    ChannelInfo,
    Interval,
    RenderedView,
    evaluate,
    kde,
    tukey_fences,
)

_TRUTH_GRID_N = 256
_GAP_PROBE_N = 64


class Verdict(str, enum.Enum):
    REVEALED = "Revealed"
    AMBIGUOUS = "Ambiguous"
    HIDDEN = "Hidden"


_VERDICT_ORDER = {Verdict.HIDDEN: 0, Verdict.AMBIGUOUS: 1, Verdict.REVEALED: 2}


class Adherence(str, enum.Enum):
    SATISFIED = "Satisfied"
    RISKED = "Risked"
    BROKEN = "Broken"


def need_adherence(verdict: Verdict) -> Adherence:
    return {Verdict.REVEALED: Adherence.SATISFIED,
            Verdict.AMBIGUOUS: Adherence.RISKED,
            Verdict.HIDDEN: Adherence.BROKEN}[verdict]


def constraint_adherence(verdict: Verdict) -> Adherence:
    return {Verdict.REVEALED: Adherence.BROKEN,
            Verdict.AMBIGUOUS: Adherence.RISKED,
            Verdict.HIDDEN: Adherence.SATISFIED}[verdict]


@dataclass(frozen=True)
class RubricParams:
    gap_frac: float = 0.05        # min gap width as fraction of domain range
    overlap_frac: float = 0.8     # how much of a true gap an empty span must cover
    resolution: float = 0.01      # minimum perceivable span, fraction of axis range
    density_floor: float = 0.05   # tau: density <= tau*max reads as empty
    density_dip: float = 0.25     # kappa: dip below kappa*max is the risked band
    peak_prominence: float = 0.2  # fraction of max density
    k_safe: int = 5               # minimum provenance size per mark for anonymity
    cv_threshold: float = 0.3     # per-unit count variation above which saturation is legible

    def __post_init__(self):
        if not (0.0 < self.density_floor < self.density_dip < 1.0):
            raise ValueError("need 0 < density_floor < density_dip < 1")
        if not (0.0 < self.gap_frac < 1.0):
            raise ValueError("gap_frac must be in (0, 1)")
        if self.k_safe < 2:
            raise ValueError("k_safe must be >= 2")
        if not (0.0 < self.overlap_frac <= 1.0):
            raise ValueError("overlap_frac must be in (0, 1]")
        if self.resolution <= 0 or self.peak_prominence <= 0 or self.cv_threshold <= 0:
            raise ValueError("thresholds must be positive")

    def to_dict(self) -> dict:
        return {
            "gap_frac": self.gap_frac,
            "overlap_frac": self.overlap_frac,
            "resolution": self.resolution,
            "density_floor": self.density_floor,
            "density_dip": self.density_dip,
            "peak_prominence": self.peak_prominence,
            "k_safe": self.k_safe,
            "cv_threshold": self.cv_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RubricParams":
        return cls(**d)


#: mark types capable, in principle, of encoding each signal
DEFAULT_MARKSETS: dict[SignalKind, frozenset[MarkType]] = {
    SignalKind.GAP: frozenset({MarkType.ARC, MarkType.AREA, MarkType.BAR, MarkType.POINT,
                               MarkType.LINE, MarkType.RECT, MarkType.TICK, MarkType.TRAIL}),
    SignalKind.PEAK: frozenset({MarkType.AREA, MarkType.BAR, MarkType.LINE, MarkType.POINT,
                                MarkType.RECT, MarkType.TICK}),
    SignalKind.OUTLIER: frozenset({MarkType.AREA, MarkType.BAR, MarkType.BOXPLOT, MarkType.LINE,
                                   MarkType.POINT, MarkType.RECT, MarkType.TICK, MarkType.TRAIL}),
    SignalKind.SATURATION: frozenset({MarkType.AREA, MarkType.BAR, MarkType.LINE, MarkType.POINT,
                                      MarkType.RECT, MarkType.TICK, MarkType.TRAIL}),
    SignalKind.INDIVIDUAL_POINT: frozenset({MarkType.AREA, MarkType.BAR, MarkType.BOXPLOT,
                                            MarkType.LINE, MarkType.POINT, MarkType.RECT,
                                            MarkType.TICK}),
    SignalKind.INDIVIDUAL_LOCATION: frozenset({MarkType.AREA, MarkType.BAR, MarkType.BOXPLOT,
                                               MarkType.LINE, MarkType.POINT, MarkType.RECT,
                                               MarkType.TICK}),
}


@dataclass(frozen=True)
class SignalRule:
    kind: SignalKind
    relevant_fields: tuple[str, ...]
    markset: frozenset[MarkType]
    params: RubricParams

    @classmethod
    def for_binding(cls, binding: SignalBinding, params: RubricParams) -> "SignalRule":
        return cls(kind=binding.signal_kind, relevant_fields=binding.relevant_fields,
                   markset=DEFAULT_MARKSETS[binding.signal_kind], params=params)


@dataclass(frozen=True)
class TraceEntry:
    heuristic: str
    mark: str
    measured: float | str
    threshold: float | str
    param: str
    outcome: str

    def to_dict(self) -> dict:
        return {"heuristic": self.heuristic, "mark": self.mark, "measured": self.measured,
                "threshold": self.threshold, "param": self.param, "outcome": self.outcome}

    def render(self) -> str:
        return (f"{self.heuristic:<28} mark={self.mark:<8} measured={self.measured!s:<12} "
                f"threshold={self.threshold!s:<12} param={self.param:<16} -> {self.outcome}")


@dataclass(frozen=True)
class Evidence:
    binding: SignalBinding
    verdict: Verdict
    trace: tuple[TraceEntry, ...]

    @property
    def deciding(self) -> TraceEntry | None:
        """The entry whose outcome matches the final verdict (last such wins)."""
        for entry in reversed(self.trace):
            if entry.outcome == self.verdict.value:
                return entry
        return self.trace[-1] if self.trace else None

    def to_dict(self) -> dict:
        return {"binding": self.binding.to_dict(), "verdict": self.verdict.value,
                "trace": [t.to_dict() for t in self.trace]}


@dataclass(frozen=True)
class ScoreCard:
    need_adherence: Adherence
    constraint_adherence: Adherence
    need_evidence: Evidence
    constraint_evidence: Evidence
    tactics: frozenset[TacticKind]

    def to_dict(self) -> dict:
        return {
            "need": {"adherence": self.need_adherence.value,
                     "evidence": self.need_evidence.to_dict()},
            "constraint": {"adherence": self.constraint_adherence.value,
                           "evidence": self.constraint_evidence.to_dict()},
            "tactics": sorted(t.value for t in self.tactics),
        }

    def explain(self) -> str:
        lines = [f"need [{self.need_evidence.binding.signal_kind.value}] -> "
                 f"{self.need_adherence.value}"]
        lines += ["  " + t.render() for t in self.need_evidence.trace]
        lines.append(f"constraint [{self.constraint_evidence.binding.signal_kind.value}] -> "
                     f"{self.constraint_adherence.value}")
        lines += ["  " + t.render() for t in self.constraint_evidence.trace]
        return "\n".join(lines)


# --- ground truth -----------------------------------------------------------------


@dataclass(frozen=True)
class TruthSet:
    kind: SignalKind
    field: str | None = None
    gaps: tuple[tuple[float, float], ...] = ()
    peaks: tuple[tuple[float, float], ...] = ()      # (location, prominence)
    outlier_rows: frozenset[int] = frozenset()
    fences: dict[str, tuple[float, float]] = dc_field(default_factory=dict)
    unit_field: str | None = None
    unit_counts: dict[str, int] = dc_field(default_factory=dict)
    cv: float | None = None
    identity_rows: frozenset[int] = frozenset()

    def present(self, params: RubricParams) -> bool:
        if self.kind == SignalKind.GAP:
            return bool(self.gaps)
        if self.kind == SignalKind.PEAK:
            return bool(self.peaks)
        if self.kind == SignalKind.OUTLIER:
            return bool(self.outlier_rows)
        if self.kind == SignalKind.SATURATION:
            return self.cv is not None and self.cv >= params.cv_threshold
        return bool(self.identity_rows)


def _non_null(dataset: Dataset, field: str) -> list[Any]:
    return [v for v in dataset.column(field) if v is not None]


def _first_quantitative(dataset: Dataset, fields: Sequence[str]) -> str | None:
    for f in fields:
        if dataset.field_schema(f).is_quantitative:
            return f
    return None


def find_true_gaps(values: Sequence[float], gap_frac: float) -> list[tuple[float, float]]:
    """Maximal empty intervals with width >= gap_frac * (max - min)."""
    arr = np.sort(np.asarray(sorted(set(values)), dtype=np.float64))
    if arr.shape[0] < 2:
        return []
    rng = float(arr[-1] - arr[0])
    if rng <= 0:
        return []
    from . import kernels

    pairs = kernels.gap_scan(arr, gap_frac * rng)
    return [(float(lo), float(hi)) for lo, hi in pairs]


def find_profile_peaks(positions: Sequence[float], heights: Sequence[float],
                       min_prominence: float, pad: bool = False,
                       domain: tuple[float, float] | None = None) -> list[tuple[float, float]]:
    """Local maxima of a height profile with at least the given prominence.

    Bin profiles are zero-padded at both ends (bars visually drop to the
    baseline beyond the rendered extent). Density grids instead get clipped
    to the data domain: a mode must stand out against adjacent regions OF THE
    DOMAIN, not against the kernel tails, otherwise a flat distribution would
    read as one giant peak.
    """
    pos = np.asarray(positions, dtype=np.float64)
    h = np.asarray(heights, dtype=np.float64)
    if domain is not None:
        keep = (pos >= domain[0]) & (pos <= domain[1])
        pos, h = pos[keep], h[keep]
    if h.size == 0 or float(h.max()) <= 0:
        return []
    offset = 0
    if pad:
        h = np.concatenate([[0.0], h, [0.0]])
        offset = 1
    idx, props = find_peaks(h, prominence=min_prominence)
    out = []
    for i, prom in zip(idx, props["prominences"]):
        out.append((float(pos[i - offset]), float(prom)))
    return out


def density_profile_peaks(grid: Sequence[float], density: Sequence[float],
                          bandwidth: float, lo: float, hi: float,
                          prominence_frac: float) -> list[tuple[float, float]]:
    """Peaks of a KDE profile, judged within the data domain [lo, hi].

    A mode must stand out against adjacent regions OF THE DOMAIN, so the
    profile is clipped to [lo, hi] before peak finding. Kernel bleed makes
    even a flat sample sag near the boundaries, which would read as one broad
    mode; when the sag-free interior (one bandwidth in from each edge) shows
    no contrast above the prominence threshold, the density is flat and has
    no peaks.
    """
    g = np.asarray(grid, dtype=np.float64)
    d = np.asarray(density, dtype=np.float64)
    keep = (g >= lo) & (g <= hi)
    g, d = g[keep], d[keep]
    if d.size == 0 or float(d.max()) <= 0:
        return []
    interior = (g >= lo + bandwidth) & (g <= hi - bandwidth)
    body = d[interior] if interior.any() else d
    if float(body.max() - body.min()) < prominence_frac * float(d.max()):
        return []
    return find_profile_peaks(g, d, prominence_frac * float(d.max()))


def match_peaks(true_peaks: Sequence[tuple[float, float]],
                rendered: Sequence[tuple[float, float]], tol: float) -> int:
    """Count true peaks matched injectively to a rendered local maximum."""
    used: set[int] = set()
    matched = 0
    for loc, _ in true_peaks:
        best, best_d = None, tol
        for j, (rloc, _) in enumerate(rendered):
            if j in used:
                continue
            d = abs(loc - rloc)
            if d <= best_d:
                best, best_d = j, d
        if best is not None:
            used.add(best)
            matched += 1
    return matched


def ground_truth(dataset: Dataset, binding: SignalBinding,
                 params: RubricParams) -> TruthSet:
    """Extract the signal directly from the raw data."""
    binding.validate_against(dataset.schema)
    if max(len(_non_null(dataset, f)) for f in binding.relevant_fields) < 4:
        raise DegenerateDataError(
            f"fewer than 4 non-null values in fields {list(binding.relevant_fields)}")

    kind = binding.signal_kind
    if kind == SignalKind.GAP:
        fld = _first_quantitative(dataset, binding.relevant_fields)
        if fld is None:
            raise DegenerateDataError("gap signal needs a quantitative field")
        gaps = find_true_gaps(_non_null(dataset, fld), params.gap_frac)
        return TruthSet(kind=kind, field=fld, gaps=tuple(gaps))

    if kind == SignalKind.PEAK:
        fld = _first_quantitative(dataset, binding.relevant_fields)
        if fld is None:
            raise DegenerateDataError("peak signal needs a quantitative field")
        values = _non_null(dataset, fld)
        curve = kde(values, grid_n=_TRUTH_GRID_N)
        peaks = density_profile_peaks(curve.grid, curve.density, curve.bandwidth,
                                      min(values), max(values), params.peak_prominence)
        return TruthSet(kind=kind, field=fld, peaks=tuple(peaks))

    if kind == SignalKind.OUTLIER:
        rows: set[int] = set()
        fences: dict[str, tuple[float, float]] = {}
        for f in binding.relevant_fields:
            if not dataset.field_schema(f).is_quantitative:
                continue
            vals = _non_null(dataset, f)
            if len(vals) < 4:
                continue
            lo, hi = tukey_fences(vals)
            fences[f] = (lo, hi)
            for i, v in enumerate(dataset.column(f)):
                if v is not None and (v < lo or v > hi):
                    rows.add(i)
        if not fences:
            raise DegenerateDataError("outlier signal needs a quantitative field")
        return TruthSet(kind=kind, field=next(iter(fences)), outlier_rows=frozenset(rows),
                        fences=fences)

    if kind == SignalKind.SATURATION:
        categorical = [(f, len(set(_non_null(dataset, f))))
                       for f in binding.relevant_fields
                       if not dataset.field_schema(f).is_quantitative]
        if not categorical:
            raise DegenerateDataError("saturation ground truth needs a categorical unit field")
        unit_field = max(categorical, key=lambda p: p[1])[0]
        counts: dict[str, int] = {}
        for v in _non_null(dataset, unit_field):
            counts[v] = counts.get(v, 0) + 1
        arr = np.asarray(list(counts.values()), dtype=np.float64)
        cv = float(arr.std() / arr.mean()) if arr.mean() > 0 else 0.0
        return TruthSet(kind=kind, unit_field=unit_field, unit_counts=counts, cv=cv)

    # IndividualPoint / IndividualLocation: identity is intrinsic to every row
    return TruthSet(kind=kind, identity_rows=frozenset(range(dataset.n_rows)))


# --- detection helpers -------------------------------------------------------------


def _relevant_sources(ci: ChannelInfo, relevant: Sequence[str]) -> bool:
    return bool(ci.sources & set(relevant))


def _raw_axis_channel(view: RenderedView, field: str,
                      axes: Sequence[str] = ("x", "y")) -> str | None:
    for ch in axes:
        ci = view.channel_info.get(ch)
        if ci is not None and ci.raw and ci.field == field:
            return ch
    return None


def _interval_axis_channel(view: RenderedView, relevant: Sequence[str],
                           axes: Sequence[str] = ("x", "y", "color")) -> str | None:
    for ch in axes:
        ci = view.channel_info.get(ch)
        if ci is not None and ci.kind == "interval" and _relevant_sources(ci, relevant):
            return ch
    return None


def _density_curve_channels(view: RenderedView, relevant: Sequence[str]
                            ) -> tuple[str, str] | None:
    grid_ch = None
    for ch, ci in view.channel_info.items():
        if ci.op == "smooth_grid" and _relevant_sources(ci, relevant):
            grid_ch = ch
    if grid_ch is None:
        return None
    for ch, ci in view.channel_info.items():
        if ci.aggregate == "density":
            return grid_ch, ch
    return None


def _interval_partition(values: Sequence[Interval]) -> list[Interval]:
    """Distinct rendered intervals sorted by partition index."""
    seen: dict[int, Interval] = {}
    for iv in values:
        if iv is not None:
            seen[iv.index] = iv
    return [seen[k] for k in sorted(seen)]


def _empty_spans(rendered: list[Interval]) -> list[tuple[float, float]]:
    """Holes between consecutive rendered intervals of a contiguous partition."""
    spans = []
    for cur, nxt in zip(rendered, rendered[1:]):
        if nxt.lo > cur.hi + 1e-12:
            spans.append((cur.hi, nxt.lo))
    return spans


def _coverage(spans: Sequence[tuple[float, float]], lo: float, hi: float) -> float:
    """Fraction of [lo, hi] covered by the union of spans."""
    if hi <= lo:
        return 0.0
    covered = 0.0
    for a, b in spans:
        covered += max(0.0, min(b, hi) - max(a, lo))
    return covered / (hi - lo)


def _uncovered_fraction(intervals: Sequence[tuple[float, float]], lo: float,
                        hi: float) -> float:
    """Fraction of [lo, hi] NOT covered by the union of intervals."""
    if hi <= lo:
        return 0.0
    events = sorted((max(a, lo), min(b, hi)) for a, b in intervals if b > lo and a < hi)
    covered = 0.0
    cursor = lo
    for a, b in events:
        if b <= cursor:
            continue
        covered += b - max(a, cursor)
        cursor = max(cursor, b)
    return 1.0 - covered / (hi - lo)


def _worst(verdicts: Sequence[Verdict]) -> Verdict:
    best = Verdict.HIDDEN
    for v in verdicts:
        if _VERDICT_ORDER[v] > _VERDICT_ORDER[best]:
            best = v
    return best


# --- per-signal detection -----------------------------------------------------------


class _Detector:
    def __init__(self, view: RenderedView, binding: SignalBinding, dataset: Dataset,
                 params: RubricParams):
        self.view = view
        self.binding = binding
        self.dataset = dataset
        self.params = params
        self.trace: list[TraceEntry] = []

    def note(self, heuristic: str, measured: float | str, threshold: float | str,
             param: str, outcome: str) -> None:
        if isinstance(measured, float):
            measured = round(measured, 6)
        if isinstance(threshold, float):
            threshold = round(threshold, 6)
        self.trace.append(TraceEntry(heuristic=heuristic, mark=self.view.mark.value,
                                     measured=measured, threshold=threshold, param=param,
                                     outcome=outcome))

    def evidence(self, verdict: Verdict) -> Evidence:
        return Evidence(binding=self.binding, verdict=verdict, trace=tuple(self.trace))

    # -- gap ---------------------------------------------------------------

    def detect_gap(self, truth: TruthSet) -> Verdict:
        p = self.params
        if not truth.gaps:
            self.note("NoTrueSignal", 0, "n/a", "gap_frac", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        fld = truth.field
        dom = field_domain(self.dataset, fld)
        rng = dom.width
        mark = self.view.mark

        if mark in (MarkType.LINE, MarkType.TRAIL):
            return self._gap_line(truth, rng)
        if mark == MarkType.ARC:
            return self._gap_arc(truth)

        density = _density_curve_channels(self.view, [fld])
        if density is not None:
            return self._gap_density(truth, density)
        raw_ch = _raw_axis_channel(self.view, fld)
        if mark in (MarkType.POINT, MarkType.TICK, MarkType.AREA) and raw_ch is not None:
            return self._gap_points(truth, raw_ch, rng)
        interval_ch = _interval_axis_channel(self.view, [fld], axes=("x", "y"))
        if interval_ch is not None:
            return self._gap_bins(truth, interval_ch, rng)
        self.note("NotEncoded", "no raw/binned/density axis", "n/a", "gap_frac",
                  Verdict.HIDDEN.value)
        return Verdict.HIDDEN

    def _gap_points(self, truth: TruthSet, channel: str, rng: float) -> Verdict:
        p = self.params
        half = 0.5 * self.view.mark_params.size * rng
        marks = [(v - half, v + half) for v in self.view.channel_values(channel)
                 if v is not None]
        verdicts = []
        for lo, hi in truth.gaps:
            width = hi - lo
            if width < p.resolution * rng:
                self.note("GapBelowResolution", width, p.resolution * rng, "resolution",
                          Verdict.AMBIGUOUS.value)
                verdicts.append(Verdict.AMBIGUOUS)
                continue
            cov = _uncovered_fraction(marks, lo, hi)
            if cov >= p.overlap_frac:
                outcome = Verdict.REVEALED
            elif cov > 0:
                outcome = Verdict.AMBIGUOUS
            else:
                outcome = Verdict.HIDDEN
            self.note("EmptySpanCoverage", cov, p.overlap_frac, "overlap_frac", outcome.value)
            verdicts.append(outcome)
        return _worst(verdicts)

    def _gap_bins(self, truth: TruthSet, channel: str, rng: float) -> Verdict:
        p = self.params
        rendered = _interval_partition(self.view.channel_values(channel))
        if not rendered:
            self.note("NotEncoded", "no rendered bins", "n/a", "gap_frac",
                      Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        ci = self.view.channel_info[channel]
        widths = [iv.width for iv in rendered]
        bin_width = ci.bin_width if ci.bin_width is not None else sum(widths) / len(widths)
        holes = _empty_spans(rendered)
        verdicts = []
        for lo, hi in truth.gaps:
            width = hi - lo
            if bin_width >= 2.0 * width:
                self.note("BinWiderThanGap", bin_width, 2.0 * width, "overlap_frac",
                          Verdict.HIDDEN.value)
                verdicts.append(Verdict.HIDDEN)
                continue
            cov = _coverage(holes, lo, hi)
            outcome = (Verdict.REVEALED if cov >= p.overlap_frac
                       else Verdict.AMBIGUOUS)
            self.note("ZeroBinCoverage", cov, p.overlap_frac, "overlap_frac", outcome.value)
            verdicts.append(outcome)
        return _worst(verdicts)

    def _gap_density(self, truth: TruthSet, channels: tuple[str, str]) -> Verdict:
        p = self.params
        grid_ch, dens_ch = channels
        grid = [v for v in self.view.channel_values(grid_ch) if v is not None]
        dens = [v for v in self.view.channel_values(dens_ch) if v is not None]
        if len(grid) != len(dens) or len(grid) < 2:
            self.note("NotEncoded", "degenerate density", "n/a", "density_floor",
                      Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        g = np.asarray(grid, dtype=np.float64)
        d = np.asarray(dens, dtype=np.float64)
        order = np.argsort(g)
        g, d = g[order], d[order]
        max_d = float(d.max())
        verdicts = []
        for lo, hi in truth.gaps:
            probe = np.linspace(lo, hi, _GAP_PROBE_N)
            pd = np.interp(probe, g, d)
            frac_floor = float(np.mean(pd <= p.density_floor * max_d))
            min_frac = float(pd.min() / max_d) if max_d > 0 else 0.0
            if frac_floor >= p.overlap_frac:
                self.note("DensityAtFloor", frac_floor, p.overlap_frac, "density_floor",
                          Verdict.REVEALED.value)
                verdicts.append(Verdict.REVEALED)
            elif min_frac < p.density_dip:
                self.note("DensityDip", min_frac, p.density_dip, "density_dip",
                          Verdict.AMBIGUOUS.value)
                verdicts.append(Verdict.AMBIGUOUS)
            else:
                self.note("DensityDip", min_frac, p.density_dip, "density_dip",
                          Verdict.HIDDEN.value)
                verdicts.append(Verdict.HIDDEN)
        return _worst(verdicts)

    def _gap_line(self, truth: TruthSet, rng: float) -> Verdict:
        fld = truth.field
        ch = _raw_axis_channel(self.view, fld, axes=("x",))
        if ch is None:
            self.note("NotEncoded", "gap field not on x", "n/a", "gap_frac",
                      Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        xs = sorted(v for v in self.view.channel_values(ch) if v is not None)
        interp = self.view.mark_params.interpolation
        verdicts = []
        for lo, hi in truth.gaps:
            spanning = None
            for a, b in zip(xs, xs[1:]):
                if a <= lo and b >= hi:
                    spanning = (a, b)
                    break
            if spanning is None:
                self.note("VertexJump", "no spanning interval", hi - lo, "gap_frac",
                          Verdict.HIDDEN.value)
                verdicts.append(Verdict.HIDDEN)
            elif interp == "linear":
                self.note("VertexJump", spanning[1] - spanning[0], hi - lo, "gap_frac",
                          Verdict.REVEALED.value)
                verdicts.append(Verdict.REVEALED)
            else:
                self.note("SmoothedVertexJump", interp, hi - lo, "gap_frac",
                          Verdict.HIDDEN.value)
                verdicts.append(Verdict.HIDDEN)
        return _worst(verdicts)

    def _gap_arc(self, truth: TruthSet) -> Verdict:
        ci = self.view.channel_info.get("color")
        if ci is None or ci.kind != "interval" or not _relevant_sources(
                ci, self.binding.relevant_fields):
            self.note("ArcValuesHidden", "no binned color", "n/a", "gap_frac",
                      Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        rendered = _interval_partition(self.view.channel_values("color"))
        holes = _empty_spans(rendered)
        verdicts = []
        for lo, hi in truth.gaps:
            overlapping = [s for s in holes if s[1] > lo and s[0] < hi]
            if overlapping:
                self.note("EmptyCategoryLegend", len(overlapping), 1, "gap_frac",
                          Verdict.REVEALED.value)
                verdicts.append(Verdict.REVEALED)
            else:
                self.note("EmptyCategoryLegend", 0, 1, "gap_frac", Verdict.HIDDEN.value)
                verdicts.append(Verdict.HIDDEN)
        return _worst(verdicts)

    # -- peak --------------------------------------------------------------

    def detect_peak(self, truth: TruthSet) -> Verdict:
        p = self.params
        if not truth.peaks:
            self.note("NoTrueSignal", 0, "n/a", "peak_prominence", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        fld = truth.field
        relevant = [fld]

        # aggregated extrema: min/max summaries of the field reveal its peaks
        extrema_ops = 0
        for t in self.view.pipeline_echo:
            if isinstance(t, Aggregate):
                for o in t.ops:
                    if o.op in ("min", "max") and o.field == fld:
                        extrema_ops += 1
        for ci in self.view.channel_info.values():
            if ci.aggregate in ("min", "max") and _relevant_sources(ci, relevant):
                extrema_ops += 1
        if extrema_ops:
            self.note("AggregatedExtrema", extrema_ops, 1, "peak_prominence",
                      Verdict.REVEALED.value)
            return Verdict.REVEALED

        dom = field_domain(self.dataset, fld)
        rng = dom.width
        positions: list[float] = []
        heights: list[float] = []
        tol = p.resolution * rng

        density = _density_curve_channels(self.view, relevant)
        raw_ch = _raw_axis_channel(self.view, fld)
        interval_ch = _interval_axis_channel(self.view, relevant, axes=("x", "y"))
        rendered_peaks: list[tuple[float, float]] | None = None
        if density is not None:
            grid_ch, dens_ch = density
            pairs = sorted(zip(self.view.channel_values(grid_ch),
                               self.view.channel_values(dens_ch)))
            xs = [a for a, _ in pairs]
            ys = [b for _, b in pairs]
            bw = self.view.channel_info[dens_ch].bandwidth or 0.0
            if len(xs) > 1:
                tol = max(tol, 0.5 * (xs[1] - xs[0]))
            rendered_peaks = density_profile_peaks(xs, ys, bw, dom.lo, dom.hi,
                                                   p.peak_prominence)
        elif raw_ch is not None:
            values = [v for v in self.view.channel_values(raw_ch) if v is not None]
            if len(set(values)) < 2:
                self.note("NotEncoded", "degenerate rendered values", "n/a",
                          "peak_prominence", Verdict.HIDDEN.value)
                return Verdict.HIDDEN
            curve = kde(values, grid_n=_TRUTH_GRID_N)
            tol = max(tol, 0.5 * (curve.grid[1] - curve.grid[0]))
            rendered_peaks = density_profile_peaks(curve.grid, curve.density,
                                                   curve.bandwidth, min(values),
                                                   max(values), p.peak_prominence)
        elif interval_ch is not None:
            rendered = _interval_partition(self.view.channel_values(interval_ch))
            counts: dict[int, float] = {}
            measure_ch = self._bin_measure_channel(interval_ch)
            if measure_ch is None:
                self.note("NotEncoded", "no height channel for bins", "n/a",
                          "peak_prominence", Verdict.HIDDEN.value)
                return Verdict.HIDDEN
            for inst in self.view.instances:
                iv = inst.value(interval_ch)
                h = inst.value(measure_ch)
                if iv is not None and h is not None:
                    counts[iv.index] = counts.get(iv.index, 0.0) + float(h)
            if not rendered:
                self.note("NotEncoded", "no rendered bins", "n/a", "peak_prominence",
                          Verdict.HIDDEN.value)
                return Verdict.HIDDEN
            lo_idx = rendered[0].index
            hi_idx = rendered[-1].index
            width = rendered[0].width
            for k in range(lo_idx, hi_idx + 1):
                iv = next((r for r in rendered if r.index == k), None)
                positions.append(iv.mid if iv is not None
                                 else rendered[0].mid + (k - lo_idx) * width)
                heights.append(counts.get(k, 0.0))
            tol = max(tol, 0.5 * width)
        else:
            self.note("NotEncoded", "field distribution not rendered", "n/a",
                      "peak_prominence", Verdict.HIDDEN.value)
            return Verdict.HIDDEN

        if rendered_peaks is None:
            max_h = max(heights) if heights else 0.0
            rendered_peaks = (find_profile_peaks(positions, heights,
                                                 p.peak_prominence * max_h, pad=True)
                              if max_h > 0 else [])
        matched = match_peaks(truth.peaks, rendered_peaks, tol)
        total = len(truth.peaks)
        if matched == total:
            outcome = Verdict.REVEALED
        elif matched > 0:
            outcome = Verdict.AMBIGUOUS
        else:
            outcome = Verdict.HIDDEN
        self.note("PeakReproduction", f"{matched}/{total}", total, "peak_prominence",
                  outcome.value)
        return outcome

    def _bin_measure_channel(self, interval_ch: str) -> str | None:
        for ch, ci in self.view.channel_info.items():
            if ch != interval_ch and ci.aggregate in ("count", "sum", "mean", "density"):
                return ch
        return None

    # -- outlier -----------------------------------------------------------

    def detect_outlier(self, truth: TruthSet) -> Verdict:
        p = self.params
        if not truth.outlier_rows:
            self.note("NoTrueSignal", 0, "n/a", "resolution", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        mark = self.view.mark
        if mark == MarkType.BOXPLOT:
            return self._outlier_boxplot(truth)
        if mark in (MarkType.POINT, MarkType.TICK):
            return self._outlier_points(truth)
        if mark in (MarkType.BAR, MarkType.RECT):
            return self._outlier_bins(truth)
        self.note("NoHeuristicForMark", mark.value, "n/a", "resolution",
                  Verdict.HIDDEN.value)
        return Verdict.HIDDEN

    def _outlier_points(self, truth: TruthSet) -> Verdict:
        p = self.params
        verdicts = []
        for fld, (lo_fence, hi_fence) in truth.fences.items():
            ch = _raw_axis_channel(self.view, fld)
            if ch is None:
                continue
            rng = field_domain(self.dataset, fld).width
            inside: list[float] = []
            beyond = []
            for inst in self.view.instances:
                v = inst.value(ch)
                if v is None:
                    continue
                if v < lo_fence or v > hi_fence:
                    beyond.append((v, inst))
                else:
                    inside.append(v)
            hits = [(v, inst) for v, inst in beyond
                    if inst.source_rows & truth.outlier_rows]
            if not hits:
                self.note("BeyondFences", 0, f"[{lo_fence:.4g}, {hi_fence:.4g}]",
                          "resolution", Verdict.HIDDEN.value)
                verdicts.append(Verdict.HIDDEN)
                continue
            for v, inst in hits:
                sep = min((abs(v - u) for u in inside), default=math.inf)
                sep_frac = sep / rng if rng > 0 else math.inf
                if sep_frac >= p.resolution:
                    self.note("IsolatedBeyondFences", sep_frac, p.resolution, "resolution",
                              Verdict.REVEALED.value)
                    verdicts.append(Verdict.REVEALED)
                else:
                    self.note("OccludedBeyondFences", sep_frac, p.resolution, "resolution",
                              Verdict.AMBIGUOUS.value)
                    verdicts.append(Verdict.AMBIGUOUS)
        if not verdicts:
            self.note("NotEncoded", "outlier fields not on an axis", "n/a", "resolution",
                      Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        return _worst(verdicts)

    def _outlier_boxplot(self, truth: TruthSet) -> Verdict:
        show = self.view.mark_params.show_outlier_points
        if not show:
            self.note("OutlierDotsOff", False, True, "k_safe", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        relevant = set(self.binding.relevant_fields)
        for inst in self.view.instances:
            stats = inst.derived_stats or {}
            dots = set(stats.get("outliers", ()))
            if dots & truth.outlier_rows:
                value_ci = None
                for ci in self.view.channel_info.values():
                    if ci.kind == "quantitative" and ci.sources & relevant:
                        value_ci = ci
                if value_ci is not None:
                    self.note("BoxplotOutlierDots", len(dots & truth.outlier_rows), 1,
                              "k_safe", Verdict.REVEALED.value)
                    return Verdict.REVEALED
        self.note("BoxplotOutlierDots", 0, 1, "k_safe", Verdict.HIDDEN.value)
        return Verdict.HIDDEN

    def _outlier_bins(self, truth: TruthSet) -> Verdict:
        interval_ch = _interval_axis_channel(self.view, self.binding.relevant_fields,
                                             axes=("x", "y"))
        if interval_ch is None:
            self.note("NotEncoded", "outlier fields not binned on an axis", "n/a",
                      "resolution", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        by_index: dict[int, set[int]] = {}
        for inst in self.view.instances:
            iv = inst.value(interval_ch)
            if iv is None:
                continue
            by_index.setdefault(iv.index, set()).update(inst.source_rows)
        nonzero = sorted(by_index)
        verdicts = []
        for idx in nonzero:
            if not (by_index[idx] & truth.outlier_rows):
                continue
            others = [j for j in nonzero if j != idx]
            if not others:
                continue
            dist = min(abs(idx - j) for j in others)
            if dist >= 2:
                self.note("SeparatedBin", dist, 2, "resolution", Verdict.REVEALED.value)
                verdicts.append(Verdict.REVEALED)
            elif not (by_index[idx] - truth.outlier_rows):
                self.note("AdjacentBin", dist, 2, "resolution", Verdict.AMBIGUOUS.value)
                verdicts.append(Verdict.AMBIGUOUS)
        if not verdicts:
            self.note("OutlierWithinBulkBins", 0, 2, "resolution", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        return _worst(verdicts)

    # -- saturation ----------------------------------------------------------

    def detect_saturation(self, truth: TruthSet) -> Verdict:
        p = self.params
        relevant = self.binding.relevant_fields
        count_ch = None
        for ch, ci in self.view.channel_info.items():
            if ci.aggregate in ("count", "density"):
                count_ch = ch
                break
        if count_ch is None:
            self.note("NoCountExposed", "none", "n/a", "cv_threshold", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        unit_channels = [ch for ch, ci in self.view.channel_info.items()
                         if ch != count_ch and _relevant_sources(ci, relevant)]
        if not unit_channels:
            self.note("UnitNotRelevant", "none", "n/a", "cv_threshold", Verdict.HIDDEN.value)
            return Verdict.HIDDEN

        values = []
        for inst in self.view.instances:
            v = inst.value(count_ch)
            if v is not None:
                values.append(float(v))
        # interval-keyed units render missing cells as visibly empty: include zeros
        interval_units = [ch for ch in unit_channels
                          if self.view.channel_info[ch].kind == "interval"]
        if interval_units and len(interval_units) == len(unit_channels):
            total_cells = 1
            for ch in interval_units:
                idxs = {iv.index for iv in self.view.channel_values(ch) if iv is not None}
                if idxs:
                    total_cells *= (max(idxs) - min(idxs) + 1)
            values.extend([0.0] * max(0, total_cells - len(values)))
        if len(values) < 2:
            self.note("PerUnitCV", 0.0, p.cv_threshold, "cv_threshold",
                      Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        arr = np.asarray(values, dtype=np.float64)
        cv = float(arr.std() / arr.mean()) if arr.mean() > 0 else 0.0
        if cv >= p.cv_threshold:
            self.note("PerUnitCV", cv, p.cv_threshold, "cv_threshold",
                      Verdict.REVEALED.value)
            return Verdict.REVEALED
        self.note("PerUnitCV", cv, p.cv_threshold, "cv_threshold", Verdict.HIDDEN.value)
        return Verdict.HIDDEN

    # -- individual point / location ------------------------------------------

    def detect_individual(self, truth: TruthSet) -> Verdict:
        p = self.params
        relevant = set(self.binding.relevant_fields)
        for ch, ci in self.view.channel_info.items():
            if ci.raw and ci.field in relevant:
                self.note("IdentityEncoded", ci.field, "any channel", "k_safe",
                          Verdict.REVEALED.value)
                return Verdict.REVEALED
        if not self.view.instances:
            self.note("NoMarks", 0, p.k_safe, "k_safe", Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        k_star = min(len(inst.source_rows) for inst in self.view.instances)
        if (self.view.mark == MarkType.BOXPLOT and self.view.mark_params.show_outlier_points):
            for inst in self.view.instances:
                stats = inst.derived_stats or {}
                if stats.get("outliers"):
                    k_star = 1
                    break
        if k_star >= p.k_safe:
            self.note("ProvenanceAnonymity", k_star, p.k_safe, "k_safe",
                      Verdict.HIDDEN.value)
            return Verdict.HIDDEN
        if k_star == 1:
            self.note("SingletonProvenance", k_star, p.k_safe, "k_safe",
                      Verdict.AMBIGUOUS.value)
        else:
            self.note("SmallProvenance(weak)", k_star, p.k_safe, "k_safe",
                      Verdict.AMBIGUOUS.value)
        return Verdict.AMBIGUOUS


def detect(view: RenderedView, binding: SignalBinding, dataset: Dataset,
           params: RubricParams) -> Evidence:
    """Apply the per-mark heuristic for the binding's signal to a rendered view."""
    for inst in view.instances:
        if inst.source_rows and max(inst.source_rows) >= dataset.n_rows:
            raise DatasetMismatchError(
                f"provenance row {max(inst.source_rows)} outside dataset of "
                f"{dataset.n_rows} rows")

    det = _Detector(view, binding, dataset, params)
    rule = SignalRule.for_binding(binding, params)
    if view.mark not in rule.markset:
        det.note("MarkOutsideMarkset", view.mark.value,
                 "/".join(sorted(m.value for m in rule.markset)), "gap_frac",
                 Verdict.HIDDEN.value)
        return det.evidence(Verdict.HIDDEN)

    truth = ground_truth(dataset, binding, params)
    kind = binding.signal_kind
    if kind == SignalKind.GAP:
        verdict = det.detect_gap(truth)
    elif kind == SignalKind.PEAK:
        verdict = det.detect_peak(truth)
    elif kind == SignalKind.OUTLIER:
        verdict = det.detect_outlier(truth)
    elif kind == SignalKind.SATURATION:
        verdict = det.detect_saturation(truth)
    else:
        verdict = det.detect_individual(truth)
    return det.evidence(verdict)


def score(spec: ChartSpec, dataset: Dataset, puzzle, params: RubricParams) -> ScoreCard:
    """Evaluate once, detect both bindings, map verdicts to adherences."""
    report = validate_spec(spec, dataset.schema)
    if not report.ok:
        raise EvalError("validate", "; ".join(v.message for v in report.violations))
    view = evaluate(spec, dataset)
    need_ev = detect(view, puzzle.need, dataset, params)
    constraint_ev = detect(view, puzzle.constraint, dataset, params)
    return ScoreCard(
        need_adherence=need_adherence(need_ev.verdict),
        constraint_adherence=constraint_adherence(constraint_ev.verdict),
        need_evidence=need_ev,
        constraint_evidence=constraint_ev,
        tactics=frozenset(tactics_used(spec)),
    )
