from __future__ import annotations

import numpy as np
import pytest

from conftest import make_dataset
from oracles import hand_fences
from showhide.chart_spec import MarkType, chart_spec_from_dict
from showhide.data_model import FieldSchema, SignalBinding, SignalKind
from showhide.errors import DatasetMismatchError, DegenerateDataError
from showhide.signal_rubric import (
    Adherence,
    DEFAULT_MARKSETS,
    Evidence,
    RubricParams,
    Verdict,
    constraint_adherence,
    detect,
    ground_truth,
    need_adherence,
    score,
)
from showhide.transform_engine import evaluate

RP = RubricParams()


def _view(spec_dict, ds):
    return evaluate(chart_spec_from_dict(spec_dict), ds)


def _detect(spec_dict, ds, binding, params=RP):
    return detect(_view(spec_dict, ds), binding, ds, params)


GAP_BINDING = SignalBinding(SignalKind.GAP, ("v",))
PEAK_BINDING = SignalBinding(SignalKind.PEAK, ("v",))


def gapped_values():
    return [float(x) for x in range(1, 101) if not (40 < x < 60)]


def gapped_ds():
    return make_dataset({"v": gapped_values(),
                         "z": ["N" if int(v) % 2 else "S" for v in gapped_values()]},
                        {"v": "quantitative", "z": "nominal"})


# --- ground truth ------------------------------------------------------------------

def test_ground_truth_gap_frozen():
    truth = ground_truth(gapped_ds(), GAP_BINDING, RP)
    assert truth.gaps == ((40.0, 60.0),)


def test_ground_truth_outlier_frozen(outlier_dataset):
    binding = SignalBinding(SignalKind.OUTLIER, ("a",))
    truth = ground_truth(outlier_dataset, binding, RP)
    assert truth.outlier_rows == frozenset({4})
    assert truth.fences["a"] == (-1.0, 7.0)
    assert truth.fences["a"] == pytest.approx(hand_fences([1, 2, 3, 4, 100]))


def test_ground_truth_uniform_has_no_peaks():
    ds = make_dataset({"v": [float(x) for x in range(0, 101)]}, {"v": "quantitative"})
    truth = ground_truth(ds, PEAK_BINDING, RP)
    assert truth.peaks == ()


def test_ground_truth_degenerate_data():
    ds = make_dataset({"v": [1.0, 2.0, None]}, {"v": "quantitative"})
    with pytest.raises(DegenerateDataError):
        ground_truth(ds, GAP_BINDING, RP)


def test_ground_truth_saturation_cv():
    units = ["a"] * 30 + ["b"] * 30 + ["c"] * 3 + ["d"] * 3
    ds = make_dataset({"u": units, "x": [float(i) for i in range(len(units))]},
                      {"u": "nominal", "x": "quantitative"})
    truth = ground_truth(ds, SignalBinding(SignalKind.SATURATION, ("x", "u")), RP)
    assert truth.unit_field == "u"
    counts = np.array([30, 30, 3, 3], dtype=float)
    assert truth.cv == pytest.approx(float(counts.std() / counts.mean()))
    assert truth.present(RP)


# --- gap heuristics ------------------------------------------------------------------

def test_gap_point_strip_revealed():
    ev = _detect({"mark": "point", "encoding": {"x": {"field": "v"}}},
                 gapped_ds(), GAP_BINDING)
    assert ev.verdict == Verdict.REVEALED
    assert ev.trace and ev.deciding.param == "overlap_frac"


def test_gap_point_large_marks_go_ambiguous_then_hidden():
    ds = gapped_ds()
    ev = _detect({"mark": "point", "mark_params": {"size": 0.17},
                  "encoding": {"x": {"field": "v"}}}, ds, GAP_BINDING)
    assert ev.verdict == Verdict.AMBIGUOUS
    ev2 = _detect({"mark": "point", "mark_params": {"size": 0.45},
                   "encoding": {"x": {"field": "v"}}}, ds, GAP_BINDING)
    assert ev2.verdict == Verdict.HIDDEN


def test_gap_histogram_bin_width_sixty_hidden():
    # derived: bins [0,60) and [60,120) both hold values, so no empty bin exists
    ev = _detect({"mark": "bar", "transforms": [
        {"op": "classify", "field": "v", "width": 60.0, "as": "vb"}],
        "encoding": {"x": {"field": "vb"}, "y": {"aggregate": "count"}}},
        gapped_ds(), GAP_BINDING)
    assert ev.verdict == Verdict.HIDDEN


def test_gap_histogram_fine_bins_revealed():
    ev = _detect({"mark": "bar", "transforms": [
        {"op": "classify", "field": "v", "width": 2.0, "as": "vb"}],
        "encoding": {"x": {"field": "vb"}, "y": {"aggregate": "count"}}},
        gapped_ds(), GAP_BINDING)
    assert ev.verdict == Verdict.REVEALED


def test_gap_histogram_medium_bins_ambiguous():
    ev = _detect({"mark": "bar", "transforms": [
        {"op": "classify", "field": "v", "width": 12.0, "as": "vb"}],
        "encoding": {"x": {"field": "vb"}, "y": {"aggregate": "count"}}},
        gapped_ds(), GAP_BINDING)
    assert ev.verdict == Verdict.AMBIGUOUS


def test_gap_bin_width_monotonicity():
    ds = gapped_ds()
    order = {Verdict.HIDDEN: 0, Verdict.AMBIGUOUS: 1, Verdict.REVEALED: 2}
    verdicts = []
    for width in (1.0, 2.0, 5.0, 8.0, 12.0, 16.0, 25.0, 41.0, 60.0, 90.0):
        ev = _detect({"mark": "bar", "transforms": [
            {"op": "classify", "field": "v", "width": width, "as": "vb"}],
            "encoding": {"x": {"field": "vb"}, "y": {"aggregate": "count"}}},
            ds, GAP_BINDING)
        verdicts.append(order[ev.verdict])
    assert verdicts == sorted(verdicts, reverse=True)


def test_gap_density_ambiguous_band():
    ds = make_dataset({"v": [float(v) for v in list(range(0, 41)) + list(range(60, 101))]},
                      {"v": "quantitative"})
    for bw, expected in [(3.0, Verdict.AMBIGUOUS), (8.0, Verdict.AMBIGUOUS),
                         (30.0, Verdict.HIDDEN)]:
        ev = _detect({"mark": "area", "transforms": [
            {"op": "smooth", "field": "v", "bandwidth": bw, "grid_n": 128}],
            "encoding": {"x": {"field": "v"}, "y": {"field": "density"}}},
            ds, GAP_BINDING)
        assert ev.verdict == expected, f"bw={bw}"


def test_gap_line_interpolation():
    ds = gapped_ds()
    ev = _detect({"mark": "line",
                  "encoding": {"x": {"field": "v"}, "y": {"field": "v"}}},
                 ds, GAP_BINDING)
    assert ev.verdict == Verdict.REVEALED
    for interp in ("step", "monotone"):
        ev = _detect({"mark": "line", "mark_params": {"interpolation": interp},
                      "encoding": {"x": {"field": "v"}, "y": {"field": "v"}}},
                     ds, GAP_BINDING)
        assert ev.verdict == Verdict.HIDDEN


def test_gap_arc_empty_category_revealed():
    ds = gapped_ds()
    ev = _detect({"mark": "arc", "transforms": [
        {"op": "band", "field": "v", "cutpoints": [41.0, 60.0], "as": "vband"}],
        "encoding": {"theta": {"aggregate": "count"}, "color": {"field": "vband"}}},
        ds, GAP_BINDING)
    assert ev.verdict == Verdict.REVEALED
    ev2 = _detect({"mark": "arc", "transforms": [
        {"op": "band", "field": "v", "quantiles": 4, "as": "vband"}],
        "encoding": {"theta": {"aggregate": "count"}, "color": {"field": "vband"}}},
        ds, GAP_BINDING)
    assert ev2.verdict == Verdict.HIDDEN


def test_gap_markset_gate_boxplot():
    ev = _detect({"mark": "boxplot", "encoding": {"x": {"field": "v"}}},
                 gapped_ds(), GAP_BINDING)
    assert ev.verdict == Verdict.HIDDEN
    assert ev.trace[0].heuristic == "MarkOutsideMarkset"
    assert MarkType.BOXPLOT not in DEFAULT_MARKSETS[SignalKind.GAP]


def test_gap_aggregates_hide():
    ev = _detect({"mark": "line", "transforms": [
        {"op": "aggregate", "groupby": ["z"], "ops": [
            {"op": "min", "field": "v", "as": "v_min"},
            {"op": "max", "field": "v", "as": "v_max"},
            {"op": "mean", "field": "v", "as": "v_mean"}]}],
        "encoding": {"x": {"field": "z"}, "y": {"field": "v_mean"}}},
        gapped_ds(), GAP_BINDING)
    assert ev.verdict == Verdict.HIDDEN


# --- peak heuristics ------------------------------------------------------------------

def bimodal_ds():
    rng = np.random.default_rng(42)
    vals = np.concatenate([rng.normal(20, 3, 120), rng.normal(70, 3, 120)])
    return make_dataset({"v": vals.round(3).tolist(),
                         "z": ["N"] * 120 + ["S"] * 120},
                        {"v": "quantitative", "z": "nominal"})


def test_peak_raw_strip_revealed():
    ds = bimodal_ds()
    ev = _detect({"mark": "point", "encoding": {"x": {"field": "v"}}}, ds, PEAK_BINDING)
    assert ev.verdict == Verdict.REVEALED


def test_peak_aggregated_extrema_revealed():
    ds = bimodal_ds()
    ev = _detect({"mark": "line", "transforms": [
        {"op": "aggregate", "groupby": ["z"], "ops": [
            {"op": "min", "field": "v", "as": "v_min"},
            {"op": "max", "field": "v", "as": "v_max"},
            {"op": "mean", "field": "v", "as": "v_mean"}]}],
        "encoding": {"x": {"field": "z"}, "y": {"field": "v_mean"}}}, ds, PEAK_BINDING)
    assert ev.verdict == Verdict.REVEALED
    assert any(t.heuristic == "AggregatedExtrema" for t in ev.trace)


def test_peak_mean_only_hides():
    ds = bimodal_ds()
    ev = _detect({"mark": "bar", "encoding": {
        "x": {"field": "z"}, "y": {"field": "v", "aggregate": "mean"}}}, ds, PEAK_BINDING)
    assert ev.verdict == Verdict.HIDDEN


def test_peak_fine_histogram_revealed_coarse_merges():
    ds = bimodal_ds()
    fine = _detect({"mark": "bar", "encoding": {
        "x": {"field": "v", "bin": {"count": 25}}, "y": {"aggregate": "count"}}},
        ds, PEAK_BINDING)
    assert fine.verdict == Verdict.REVEALED
    # one giant bin merges the modes: a strict subset of true peaks survives
    coarse = _detect({"mark": "bar", "encoding": {
        "x": {"field": "v", "bin": {"count": 1}}, "y": {"aggregate": "count"}}},
        ds, PEAK_BINDING)
    assert coarse.verdict == Verdict.AMBIGUOUS


def test_peak_smooth_oversmoothed_merges_modes():
    ds = bimodal_ds()
    ev = _detect({"mark": "area", "transforms": [
        {"op": "smooth", "field": "v", "bandwidth": 40.0, "grid_n": 128}],
        "encoding": {"x": {"field": "v"}, "y": {"field": "density"}}}, ds, PEAK_BINDING)
    assert ev.verdict == Verdict.HIDDEN


# --- outlier heuristics ----------------------------------------------------------------

def outlier_ds():
    vals = [float(v) for v in [48, 50, 51, 52, 53, 54, 55, 56, 57, 60, 140]]
    return make_dataset({"v": vals, "z": ["N"] * 5 + ["S"] * 6},
                        {"v": "quantitative", "z": "nominal"})


OUT_BINDING = SignalBinding(SignalKind.OUTLIER, ("v",))


def test_outlier_points_revealed():
    ev = _detect({"mark": "point", "encoding": {"x": {"field": "v"}}},
                 outlier_ds(), OUT_BINDING)
    assert ev.verdict == Verdict.REVEALED


def test_outlier_boxplot_flag():
    ds = outlier_ds()
    ev = _detect({"mark": "boxplot", "encoding": {"x": {"field": "v"}}}, ds, OUT_BINDING)
    assert ev.verdict == Verdict.REVEALED
    ev2 = _detect({"mark": "boxplot", "mark_params": {"show_outlier_points": False},
                   "encoding": {"x": {"field": "v"}}}, ds, OUT_BINDING)
    assert ev2.verdict == Verdict.HIDDEN


def test_outlier_bins_separated_vs_adjacent():
    ds = outlier_ds()
    sep = _detect({"mark": "bar", "transforms": [
        {"op": "classify", "field": "v", "width": 10.0, "as": "vb"}],
        "encoding": {"x": {"field": "vb"}, "y": {"aggregate": "count"}}},
        ds, OUT_BINDING)
    assert sep.verdict == Verdict.REVEALED
    adj = _detect({"mark": "bar", "transforms": [
        {"op": "classify", "field": "v", "width": 80.0, "as": "vb"}],
        "encoding": {"x": {"field": "vb"}, "y": {"aggregate": "count"}}},
        ds, OUT_BINDING)
    assert adj.verdict in (Verdict.AMBIGUOUS, Verdict.HIDDEN)


def test_outlier_none_planted_hidden(outlier_dataset):
    ds = make_dataset({"v": [1.0, 2.0, 3.0, 4.0, 5.0]}, {"v": "quantitative"})
    ev = _detect({"mark": "point", "encoding": {"x": {"field": "v"}}}, ds, OUT_BINDING)
    assert ev.verdict == Verdict.HIDDEN


# --- saturation ---------------------------------------------------------------------

def saturation_ds():
    units, lats, lons = [], [], []
    rng = np.random.default_rng(7)
    for unit, count, lat in [("a", 40, 30.0), ("b", 5, 35.0), ("c", 5, 40.0),
                             ("d", 10, 45.0)]:
        units += [unit] * count
        lats += list(rng.normal(lat, 0.3, count))
        lons += list(rng.normal(-100 + 10 * ord(unit[0]) % 7, 0.3, count))
    return make_dataset({"u": units,
                         "latitude": [round(v, 4) for v in lats],
                         "longitude": [round(v, 4) for v in lons]},
                        {"u": "nominal", "latitude": "quantitative",
                         "longitude": "quantitative"})


SAT_BINDING = SignalBinding(SignalKind.SATURATION, ("latitude", "longitude", "u"))


def test_saturation_unit_counts_revealed():
    ev = _detect({"mark": "bar", "encoding": {
        "x": {"field": "u"}, "y": {"aggregate": "count"}}}, saturation_ds(), SAT_BINDING)
    assert ev.verdict == Verdict.REVEALED


def test_saturation_no_count_channel_hidden():
    ev = _detect({"mark": "point", "encoding": {
        "x": {"field": "longitude"}, "y": {"field": "latitude"}}},
        saturation_ds(), SAT_BINDING)
    assert ev.verdict == Verdict.HIDDEN


def test_saturation_flat_counts_hidden():
    units = ["a"] * 20 + ["b"] * 20 + ["c"] * 20
    ds = make_dataset({"u": units, "latitude": [30.0 + i * 0.01 for i in range(60)]},
                      {"u": "nominal", "latitude": "quantitative"})
    ev = _detect({"mark": "bar", "encoding": {
        "x": {"field": "u"}, "y": {"aggregate": "count"}}}, ds,
        SignalBinding(SignalKind.SATURATION, ("latitude", "u")))
    assert ev.verdict == Verdict.HIDDEN


def test_saturation_2d_bins_revealed():
    ev = _detect({"mark": "rect", "encoding": {
        "x": {"field": "longitude", "bin": {"count": 12}},
        "y": {"field": "latitude", "bin": {"count": 12}},
        "color": {"aggregate": "count"}}}, saturation_ds(), SAT_BINDING)
    assert ev.verdict == Verdict.REVEALED


# --- individual point / location ----------------------------------------------------

IND_BINDING = SignalBinding(SignalKind.INDIVIDUAL_POINT, ("wid", "z"))


def warehouse_ds(n=30):
    rng = np.random.default_rng(11)
    return make_dataset(
        {"wid": [f"W{i:03d}" for i in range(n)],
         "z": [str(z) for z in rng.integers(0, 4, n)],
         "p": rng.normal(300, 40, n).round(0).tolist(),
         "l": rng.normal(0.08, 0.02, n).round(4).tolist()},
        {"wid": "nominal", "z": "nominal", "p": "quantitative", "l": "quantitative"})


def test_individual_identity_encoding_dominance():
    ds = warehouse_ds()
    for spec in [
        {"mark": "point", "encoding": {"x": {"field": "p"}, "color": {"field": "wid"}}},
        {"mark": "point", "encoding": {"x": {"field": "p"}, "detail": {"field": "wid"}}},
        {"mark": "bar", "encoding": {"x": {"field": "z"}, "y": {"aggregate": "count"}}},
    ]:
        ev = _detect(spec, ds, IND_BINDING)
        assert ev.verdict == Verdict.REVEALED
        assert ev.trace[0].heuristic == "IdentityEncoded"


def test_individual_idless_scatter_singleton_ambiguous():
    ds = warehouse_ds()
    ev = _detect({"mark": "point",
                  "encoding": {"x": {"field": "p"}, "y": {"field": "l"}}},
                 ds, IND_BINDING)
    assert ev.verdict == Verdict.AMBIGUOUS
    assert ev.deciding.heuristic == "SingletonProvenance"


def test_individual_large_groups_hidden():
    ds = warehouse_ds(40)
    ev = _detect({"mark": "bar", "transforms": [
        {"op": "classify", "field": "p", "count": 3, "as": "pb"}],
        "encoding": {"x": {"field": "pb"}, "y": {"aggregate": "count"}}},
        ds, IND_BINDING)
    if ev.verdict != Verdict.HIDDEN:
        # only legitimate if some bin is genuinely small
        assert min(len(i.source_rows) for i in _view(
            {"mark": "bar", "transforms": [
                {"op": "classify", "field": "p", "count": 3, "as": "pb"}],
             "encoding": {"x": {"field": "pb"}, "y": {"aggregate": "count"}}}, ds
        ).instances) < RP.k_safe


def test_individual_anonymity_monotone_under_coarsening():
    ds = warehouse_ds(60)
    order = {Verdict.HIDDEN: 0, Verdict.AMBIGUOUS: 1, Verdict.REVEALED: 2}
    ranks = []
    k_stars = []
    for bins in (30, 10, 3, 1):
        spec = {"mark": "bar", "transforms": [
            {"op": "classify", "field": "p", "count": bins, "as": "pb"}],
            "encoding": {"x": {"field": "pb"}, "y": {"aggregate": "count"}}}
        view = _view(spec, ds)
        k_stars.append(min(len(i.source_rows) for i in view.instances))
        ranks.append(order[detect(view, IND_BINDING, ds, RP).verdict])
    assert k_stars == sorted(k_stars)
    assert ranks == sorted(ranks, reverse=True)


def test_individual_boxplot_outlier_dots_leak():
    vals = [float(v) for v in [48, 50, 51, 52, 53, 54, 55, 56, 57, 60, 140]]
    ds = make_dataset({"v": vals, "wid": [f"W{i}" for i in range(11)]},
                      {"v": "quantitative", "wid": "nominal"})
    binding = SignalBinding(SignalKind.INDIVIDUAL_POINT, ("wid",))
    ev = _detect({"mark": "boxplot", "encoding": {"x": {"field": "v"}}}, ds, binding)
    assert ev.verdict == Verdict.AMBIGUOUS
    ev2 = _detect({"mark": "boxplot", "mark_params": {"show_outlier_points": False},
                   "encoding": {"x": {"field": "v"}}}, ds, binding)
    assert ev2.verdict == Verdict.HIDDEN


# --- adherence / scorecard -------------------------------------------------------------

def test_negation_duality():
    for v in Verdict:
        pairs = {(need_adherence(v), constraint_adherence(v))}
        assert pairs <= {(Adherence.SATISFIED, Adherence.BROKEN),
                        (Adherence.RISKED, Adherence.RISKED),
                        (Adherence.BROKEN, Adherence.SATISFIED)}


def test_trace_nonempty_when_not_hidden():
    ev = _detect({"mark": "point", "encoding": {"x": {"field": "v"}}},
                 gapped_ds(), GAP_BINDING)
    assert ev.verdict != Verdict.HIDDEN
    assert len(ev.trace) > 0
    assert all(t.param for t in ev.trace)


def test_dataset_mismatch():
    ds_small = make_dataset({"v": [1.0, 2.0, 3.0, 4.0]}, {"v": "quantitative"})
    view = _view({"mark": "point", "encoding": {"x": {"field": "v"}}}, gapped_ds())
    with pytest.raises(DatasetMismatchError):
        detect(view, GAP_BINDING, ds_small, RP)


def test_scorecard_consistency():
    from showhide.data_model import PuzzleSpec

    ds = gapped_ds()
    puzzle = PuzzleSpec(id="p", title="t", setting_text="s", receiver_prompt="r",
                        sender_prompt="sp", dataset_ref="d",
                        need=SignalBinding(SignalKind.PEAK, ("v",)),
                        constraint=SignalBinding(SignalKind.GAP, ("v",)))
    card = score(chart_spec_from_dict(
        {"mark": "point", "encoding": {"x": {"field": "v"}}}), ds, puzzle, RP)
    assert card.constraint_adherence == constraint_adherence(
        card.constraint_evidence.verdict)
    assert card.need_adherence == need_adherence(card.need_evidence.verdict)
    assert "EncodedValues" in {t.value for t in card.tactics}
    text = card.explain()
    assert "constraint" in text and "->" in text
