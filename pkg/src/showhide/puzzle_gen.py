"""Seeded synthetic dataset generation with planted signals, plus a tension oracle.

Each template plants the signals its puzzle needs (modes + an empty interval,
displaced outliers, concentrated units) with enough margin that ground_truth
recovers every plant at default rubric parameters. verify_puzzle then scores
a fixed battery of canonical specs to certify the puzzle has genuine
show-hide tension.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .chart_spec import ChartSpec, chart_spec_from_dict, validate_spec
from .data_model import (
    Dataset,
    FieldSchema,
    PuzzleSpec,
    SignalBinding,
    SignalKind,
    load_dataset,
    load_puzzle,
)
from .errors import InfeasiblePlantError
from .signal_rubric import Adherence, RubricParams, ground_truth, score
from .transform_engine import silverman_bandwidth
from .utils import canonical_json

TEMPLATES = ("peaks_gaps", "outliers_points", "saturation_locations")


# --- template parameter blocks ---------------------------------------------------

@dataclass(frozen=True)
class ModeSpec:
    center: float
    sigma: float
    weight: float = 1.0


@dataclass(frozen=True)
class PeaksGapsPlant:
    modes: tuple[ModeSpec, ...] = (ModeSpec(12.0, 5.0), ModeSpec(50.0, 5.0),
                                   ModeSpec(88.0, 5.0))
    gaps: tuple[tuple[float, float], ...] = ((56.0, 64.0),)
    value_range: tuple[float, float] = (0.0, 100.0)
    lattice_n: int = 36              # evenly spaced background readings
    lattice_jitter: float = 0.75


@dataclass(frozen=True)
class OutliersPlant:
    n_outliers: int = 3
    displacement_iqr: float = 2.5    # beyond the Tukey fence, in bulk-IQR units
    parcels_mean: float = 300.0
    parcels_sigma: float = 45.0
    late_mean: float = 0.08
    late_sigma: float = 0.02


@dataclass(frozen=True)
class SaturationPlant:
    n_regions: int = 4
    states_per_region: int = 3
    counties_per_state: int = 5
    cluster_counties: int = 8
    cluster_intensity: float = 6.0
    max_unit_frac: float = 0.15      # plausibility cap: no unit above this share of rows
    scatter_sigma: float = 0.35      # store scatter around county centers, in degrees


@dataclass(frozen=True)
class TemplateParams:
    template: str
    n_rows: int
    seed: int
    plant: PeaksGapsPlant | OutliersPlant | SaturationPlant

    def to_dict(self) -> dict:
        plant = {k: (list(v) if isinstance(v, tuple) else v)
                 for k, v in self.plant.__dict__.items()}
        if isinstance(self.plant, PeaksGapsPlant):
            plant["modes"] = [[m.center, m.sigma, m.weight] for m in self.plant.modes]
            plant["gaps"] = [list(g) for g in self.plant.gaps]
        return {"template": self.template, "n_rows": self.n_rows, "seed": self.seed,
                "plant": plant}


def default_params(template: str, seed: int, n_rows: int | None = None) -> TemplateParams:
    if template == "peaks_gaps":
        return TemplateParams(template=template, n_rows=n_rows or 240, seed=seed,
                              plant=PeaksGapsPlant())
    if template == "outliers_points":
        return TemplateParams(template=template, n_rows=n_rows or 60, seed=seed,
                              plant=OutliersPlant())
    if template == "saturation_locations":
        return TemplateParams(template=template, n_rows=n_rows or 600, seed=seed,
                              plant=SaturationPlant())
    raise ValueError(f"unknown template {template!r}")


# --- schemas ----------------------------------------------------------------------

PEAKS_GAPS_SCHEMA = (
    FieldSchema("reading_id", "quantitative"),
    FieldSchema("zone", "nominal"),
    FieldSchema("day_type", "nominal"),
    FieldSchema("pollutant_ppb", "quantitative", units="ppb"),
)

OUTLIERS_SCHEMA = (
    FieldSchema("warehouse_id", "nominal"),
    FieldSchema("zone", "nominal"),
    FieldSchema("avg_daily_parcels", "quantitative", units="parcels/day"),
    FieldSchema("pct_late_deliveries", "quantitative", units="fraction in [0,1]"),
)

SATURATION_SCHEMA = (
    FieldSchema("ID", "nominal"),
    FieldSchema("city", "nominal"),
    FieldSchema("STUSPS", "nominal"),
    FieldSchema("latitude", "quantitative", units="deg"),
    FieldSchema("longitude", "quantitative", units="deg"),
    FieldSchema("fips", "quantitative"),
    FieldSchema("regions", "nominal"),
    FieldSchema("REGIONCE", "quantitative"),
    FieldSchema("county_name", "nominal"),
    FieldSchema("GEOID", "quantitative"),
)

TEMPLATE_SCHEMAS = {
    "peaks_gaps": PEAKS_GAPS_SCHEMA,
    "outliers_points": OUTLIERS_SCHEMA,
    "saturation_locations": SATURATION_SCHEMA,
}

_ZONES = ("North", "South", "East", "West")
_REGION_NAMES = ("Northeast", "Midwest", "South", "West")
_CITY_PARTS_A = ("Alder", "Birch", "Cedar", "Dune", "Elm", "Fern", "Grove", "Haven",
                 "Iron", "Juniper", "Knoll", "Lark")
_CITY_PARTS_B = ("field", "port", "ton", "burg", "view", "dale", "ford", "mont",
                 "side", "gate", "crest", "bay")


# --- generators -------------------------------------------------------------------


def _in_any_gap(v: float, gaps: Sequence[tuple[float, float]]) -> bool:
    return any(lo < v < hi for lo, hi in gaps)


def _gen_peaks_gaps(params: TemplateParams, rng: random.Random) -> tuple[Dataset, PuzzleSpec]:
    plant: PeaksGapsPlant = params.plant
    lo, hi = plant.value_range
    rng_width = hi - lo
    for glo, ghi in plant.gaps:
        for m in plant.modes:
            if glo <= m.center <= ghi:
                raise InfeasiblePlantError(
                    f"gap ({glo}, {ghi}) contains mode center {m.center}")
        if ghi - glo < 0.05 * rng_width:
            raise InfeasiblePlantError(
                f"gap ({glo}, {ghi}) narrower than 5% of the value range")

    values: list[float] = []
    # background lattice: evenly spaced readings keep inter-mode valleys free of
    # accidental empty intervals; only the planted gaps stay empty
    step = rng_width / (plant.lattice_n - 1)
    for i in range(plant.lattice_n):
        v = lo + i * step + rng.uniform(-plant.lattice_jitter, plant.lattice_jitter)
        v = min(max(v, lo), hi)
        if not _in_any_gap(v, plant.gaps):
            values.append(v)

    n_mode_samples = params.n_rows - len(values)
    weights = [m.weight for m in plant.modes]
    total_w = sum(weights)
    for i in range(n_mode_samples):
        r = rng.random() * total_w
        mode = plant.modes[-1]
        for m, w in zip(plant.modes, weights):
            if r < w:
                mode = m
                break
            r -= w
        for _ in range(1000):
            v = rng.gauss(mode.center, mode.sigma)
            if lo <= v <= hi and not _in_any_gap(v, plant.gaps):
                values.append(v)
                break
        else:
            raise InfeasiblePlantError(
                f"mode at {mode.center} cannot place samples outside the gaps")

    rows = []
    for i, v in enumerate(values):
        zone = _ZONES[rng.randrange(4)]
        day_type = "weekday" if rng.random() < 5 / 7 else "weekend"
        rows.append((float(1000 + i), zone, day_type, round(v, 3)))
    dataset = Dataset(schema=PEAKS_GAPS_SCHEMA, rows=tuple(rows))

    puzzle = PuzzleSpec(
        id=f"peaks-gaps-{params.seed}",
        title="Air quality briefing",
        setting_text=("A data broker sells a high-resolution air-quality feed to an "
                      "environmental analyst deciding whether to license it."),
        receiver_prompt=("Find out where pollutant readings peak or fall off sharply "
                         "so your team can prioritize follow-up monitoring."),
        sender_prompt=("Demonstrate that the feed captures the pollution peaks the "
                       "client cares about, but do not let your charts give away "
                       "where your readings have empty stretches: those expose how "
                       "and when your network collects."),
        dataset_ref=f"peaks_gaps_{params.seed}",
        need=SignalBinding(SignalKind.PEAK, ("pollutant_ppb",)),
        constraint=SignalBinding(SignalKind.GAP, ("pollutant_ppb",)),
    )
    return dataset, puzzle


def _truncated_gauss(rng: random.Random, mu: float, sigma: float, z_max: float) -> float:
    while True:
        v = rng.gauss(mu, sigma)
        if abs(v - mu) <= z_max * sigma:
            return v


def _quartiles(values: list[float]) -> tuple[float, float]:
    from .transform_engine import quantile

    return quantile(values, 0.25), quantile(values, 0.75)


def _gen_outliers(params: TemplateParams, rng: random.Random) -> tuple[Dataset, PuzzleSpec]:
    plant: OutliersPlant = params.plant
    n_bulk = params.n_rows - plant.n_outliers
    if n_bulk < 8:
        raise InfeasiblePlantError("too few bulk rows to support planted outliers")

    # bulk stays within 1.4 sigma: even with a ~20% tight sample IQR and
    # integer rounding, the realized fences must clear every non-planted row
    parcels = [_truncated_gauss(rng, plant.parcels_mean, plant.parcels_sigma, 1.4)
               for _ in range(n_bulk)]
    late = [_truncated_gauss(rng, plant.late_mean, plant.late_sigma, 1.4)
            for _ in range(n_bulk)]

    q1p, q3p = _quartiles(parcels)
    q1l, q3l = _quartiles(late)
    iqr_p = q3p - q1p
    iqr_l = q3l - q1l
    d = plant.displacement_iqr
    out_rows: list[tuple[float, float]] = []
    for k in range(plant.n_outliers):
        jig = rng.uniform(0.0, 0.5)
        if k % 2 == 0:
            out_rows.append((q3p + (1.5 + d + jig) * iqr_p,
                             _truncated_gauss(rng, plant.late_mean, plant.late_sigma, 1.4)))
        else:
            out_rows.append((_truncated_gauss(rng, plant.parcels_mean,
                                              plant.parcels_sigma, 1.4),
                             q3l + (1.5 + d + jig) * iqr_l))

    all_rows = [[p, l, False] for p, l in zip(parcels, late)] \
        + [[p, l, True] for p, l in out_rows]
    # only planted rows may sit beyond the realized Tukey fences: a freak
    # sample IQR can pull the fences inside the bulk, so clamp bulk extremes
    from .transform_engine import tukey_fences

    for col, margin in ((0, 2.0), (1, 0.001)):
        for _ in range(3):
            fences_lo, fences_hi = tukey_fences([r[col] for r in all_rows])
            moved = False
            for r in all_rows:
                if not r[2] and not (fences_lo + margin <= r[col] <= fences_hi - margin):
                    r[col] = min(max(r[col], fences_lo + margin), fences_hi - margin)
                    moved = True
            if not moved:
                break

    rng.shuffle(all_rows)
    rows = []
    for i, (p, l, _planted) in enumerate(all_rows):
        rows.append((f"W{i + 1:03d}", _ZONES[rng.randrange(4)],
                     float(round(p)), round(max(0.0, min(1.0, l)), 4)))
    dataset = Dataset(schema=OUTLIERS_SCHEMA, rows=tuple(rows))

    puzzle = PuzzleSpec(
        id=f"outliers-points-{params.seed}",
        title="Warehouse audit planning",
        setting_text=("A logistics planner is buying warehouse performance data to "
                      "schedule inspections; the broker must protect supplier "
                      "relationships."),
        receiver_prompt=("Work out whether any warehouses are atypical in workload or "
                         "lateness so you can target audits after signing."),
        sender_prompt=("Show that the dataset surfaces atypical warehouses, but keep "
                       "warehouse and zone identities out of your charts: pinpointing "
                       "a specific site would burn a supplier relationship."),
        dataset_ref=f"outliers_points_{params.seed}",
        need=SignalBinding(SignalKind.OUTLIER,
                           ("avg_daily_parcels", "pct_late_deliveries")),
        constraint=SignalBinding(SignalKind.INDIVIDUAL_POINT, ("warehouse_id", "zone")),
    )
    return dataset, puzzle


def _apportion(weights: list[float], total: int) -> list[int]:
    """Largest-remainder apportionment of `total` rows over weights."""
    s = sum(weights)
    raw = [w / s * total for w in weights]
    counts = [int(math.floor(r)) for r in raw]
    remainder = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def _gen_saturation(params: TemplateParams, rng: random.Random) -> tuple[Dataset, PuzzleSpec]:
    plant: SaturationPlant = params.plant
    n_states = plant.n_regions * plant.states_per_region
    n_counties = n_states * plant.counties_per_state
    if plant.cluster_counties >= n_counties:
        raise InfeasiblePlantError("cluster count must be below the county count")

    # unit hierarchy with a synthetic lat/lon layout: states tile a grid,
    # counties tile each state block
    lat_lo, lat_hi = 25.0, 49.0
    lon_lo, lon_hi = -124.0, -67.0
    grid_cols = 4
    grid_rows = (n_states + grid_cols - 1) // grid_cols
    state_w = (lon_hi - lon_lo) / grid_cols
    state_h = (lat_hi - lat_lo) / grid_rows

    counties = []
    for s in range(n_states):
        region_idx = s // plant.states_per_region
        stusps = chr(ord("A") + region_idx) + chr(ord("A") + s % plant.states_per_region)
        col, row_idx = s % grid_cols, s // grid_cols
        base_lon = lon_lo + col * state_w
        base_lat = lat_lo + row_idx * state_h
        for c in range(plant.counties_per_state):
            county_global = s * plant.counties_per_state + c
            name = (_CITY_PARTS_A[county_global % len(_CITY_PARTS_A)]
                    + _CITY_PARTS_B[(county_global // len(_CITY_PARTS_A)) % len(_CITY_PARTS_B)])
            counties.append({
                "region": _REGION_NAMES[region_idx],
                "regionce": region_idx + 1,
                "stusps": stusps,
                "fips": 10 + s,
                "county_name": f"{name.title()} County",
                "geoid": (10 + s) * 1000 + c + 1,
                "city": f"{name.title()}",
                "lat": base_lat + (c + 0.5) / plant.counties_per_state * state_h,
                "lon": base_lon + 0.5 * state_w,
            })

    weights = [1.0] * n_counties
    cluster_idx = rng.sample(range(n_counties), plant.cluster_counties)
    for i in cluster_idx:
        weights[i] = plant.cluster_intensity
    counts = _apportion(weights, params.n_rows)
    cap = max(2, int(plant.max_unit_frac * params.n_rows))
    overflow = sum(max(0, c - cap) for c in counts)
    if overflow:
        counts = [min(c, cap) for c in counts]
        order = sorted(range(n_counties), key=lambda i: counts[i])
        k = 0
        while overflow > 0:
            i = order[k % n_counties]
            if counts[i] < cap:
                counts[i] += 1
                overflow -= 1
            k += 1

    rows = []
    store = 0
    for county, count in zip(counties, counts):
        for _ in range(count):
            store += 1
            lat = county["lat"] + rng.gauss(0.0, plant.scatter_sigma)
            lon = county["lon"] + rng.gauss(0.0, plant.scatter_sigma)
            rows.append((f"S{store:04d}", county["city"], county["stusps"],
                         round(lat, 5), round(lon, 5), float(county["fips"]),
                         county["region"], float(county["regionce"]),
                         county["county_name"], float(county["geoid"])))
    rng.shuffle(rows)
    dataset = Dataset(schema=SATURATION_SCHEMA, rows=tuple(rows))

    puzzle = PuzzleSpec(
        id=f"saturation-locations-{params.seed}",
        title="Retail saturation survey",
        setting_text=("A tenants' rights analyst is evaluating a retail-location "
                      "dataset; the broker must not expose exact storefronts."),
        receiver_prompt=("Understand where retail saturation is high or low across "
                         "the country before committing to the purchase."),
        sender_prompt=("Show where store concentration is high, but never at a grain "
                       "that lets a landlord or chain identify specific storefronts "
                       "or blocks."),
        dataset_ref=f"saturation_locations_{params.seed}",
        need=SignalBinding(SignalKind.SATURATION,
                           ("latitude", "longitude", "regions", "STUSPS", "county_name")),
        constraint=SignalBinding(SignalKind.INDIVIDUAL_LOCATION,
                                 ("ID", "latitude", "longitude")),
    )
    return dataset, puzzle


def gen_dataset(params: TemplateParams) -> tuple[Dataset, PuzzleSpec]:
    """Generate a dataset + puzzle for a template; identical seed, identical output."""
    rng = random.Random(params.seed)
    if params.template == "peaks_gaps":
        return _gen_peaks_gaps(params, rng)
    if params.template == "outliers_points":
        return _gen_outliers(params, rng)
    if params.template == "saturation_locations":
        return _gen_saturation(params, rng)
    raise ValueError(f"unknown template {params.template!r}")


# --- canonical spec battery ---------------------------------------------------------


def _spec(d: dict) -> ChartSpec:
    return chart_spec_from_dict(d)


def walkthrough_specs() -> list[tuple[str, ChartSpec]]:
    """The three canonical peaks_gaps solutions used in grading walkthroughs.

    Raw strip, fixed-bandwidth smoothed density, and min/max/mean by zone:
    against a default peaks_gaps dataset these break, risk, and satisfy the
    gap constraint respectively.
    """
    return [
        ("raw_point_strip", _spec(
            {"mark": "point", "encoding": {"x": {"field": "pollutant_ppb"}}})),
        ("smoothed_density", _spec(
            {"mark": "area",
             "transforms": [{"op": "smooth", "field": "pollutant_ppb",
                             "bandwidth": 4.5, "grid_n": 128}],
             "encoding": {"x": {"field": "pollutant_ppb"},
                          "y": {"field": "density"}}})),
        ("minmaxmean_by_zone", _spec(
            {"mark": "line",
             "transforms": [{"op": "aggregate", "groupby": ["zone"], "ops": [
                 {"op": "min", "field": "pollutant_ppb", "as": "min_ppb"},
                 {"op": "max", "field": "pollutant_ppb", "as": "max_ppb"},
                 {"op": "mean", "field": "pollutant_ppb", "as": "mean_ppb"}]}],
             "encoding": {"x": {"field": "zone"}, "y": {"field": "mean_ppb"}}})),
    ]


def battery_specs(puzzle: PuzzleSpec, dataset: Dataset) -> list[tuple[str, ChartSpec]]:
    """The fixed battery of 24 canonical specs used by verify_puzzle.

    Construction rule (published): q1/q2 are the first two quantitative fields
    referenced by the puzzle bindings (falling back to schema order), c1/c2 the
    two lowest-cardinality categorical fields. Densities use 0.5x / 1x / 2x the
    Silverman bandwidth of q1.
    """
    bound = [f for b in (puzzle.need, puzzle.constraint) for f in b.relevant_fields]
    quant = [f for f in bound if dataset.field_schema(f).is_quantitative]
    for fs in dataset.schema:
        if fs.is_quantitative and fs.name not in quant:
            quant.append(fs.name)
    cats = sorted((fs.name for fs in dataset.schema if not fs.is_quantitative),
                  key=lambda n: (len(set(dataset.column(n))), n))
    q1, q2 = quant[0], quant[1 % len(quant)]
    c1 = cats[0] if cats else None
    c2 = cats[1 % len(cats)] if cats else None
    h = silverman_bandwidth([v for v in dataset.column(q1) if v is not None])

    specs: list[tuple[str, ChartSpec]] = [
        ("raw_points_strip", _spec({"mark": "point", "encoding": {"x": {"field": q1}}})),
        ("raw_scatter", _spec({"mark": "point",
                               "encoding": {"x": {"field": q1}, "y": {"field": q2}}})),
        ("raw_ticks", _spec({"mark": "tick", "encoding": {"x": {"field": q1}}})),
        ("hist_coarse", _spec({"mark": "bar", "encoding": {
            "x": {"field": q1, "bin": {"count": 6}}, "y": {"aggregate": "count"}}})),
        ("hist_medium", _spec({"mark": "bar", "encoding": {
            "x": {"field": q1, "bin": {"count": 15}}, "y": {"aggregate": "count"}}})),
        ("hist_fine", _spec({"mark": "bar", "encoding": {
            "x": {"field": q1, "bin": {"count": 40}}, "y": {"aggregate": "count"}}})),
        ("density_narrow", _spec({"mark": "area", "transforms": [
            {"op": "smooth", "field": q1, "bandwidth": 0.5 * h, "grid_n": 128}],
            "encoding": {"x": {"field": q1}, "y": {"field": "density"}}})),
        ("density_default", _spec({"mark": "area", "transforms": [
            {"op": "smooth", "field": q1, "grid_n": 128}],
            "encoding": {"x": {"field": q1}, "y": {"field": "density"}}})),
        ("density_wide", _spec({"mark": "area", "transforms": [
            {"op": "smooth", "field": q1, "bandwidth": 2.0 * h, "grid_n": 128}],
            "encoding": {"x": {"field": q1}, "y": {"field": "density"}}})),
        ("boxplot_plain", _spec({"mark": "boxplot", "encoding": {"x": {"field": q1}}})),
        ("boxplot_no_dots", _spec({"mark": "boxplot",
                                   "mark_params": {"show_outlier_points": False},
                                   "encoding": {"x": {"field": q1}}})),
        ("grid2d_coarse", _spec({"mark": "rect", "encoding": {
            "x": {"field": q1, "bin": {"count": 6}}, "y": {"field": q2, "bin": {"count": 6}},
            "color": {"aggregate": "count"}}})),
        ("grid2d_medium", _spec({"mark": "rect", "encoding": {
            "x": {"field": q1, "bin": {"count": 12}},
            "y": {"field": q2, "bin": {"count": 12}},
            "color": {"aggregate": "count"}}})),
        ("grid2d_fine", _spec({"mark": "rect", "encoding": {
            "x": {"field": q1, "bin": {"count": 30}},
            "y": {"field": q2, "bin": {"count": 30}},
            "color": {"aggregate": "count"}}})),
        ("subsample_half", _spec({"mark": "point", "transforms": [
            {"op": "subsample", "fraction": 0.5, "seed": 17}],
            "encoding": {"x": {"field": q1}, "y": {"field": q2}}})),
        ("band_quartile_counts", _spec({"mark": "bar", "transforms": [
            {"op": "band", "field": q1, "quantiles": 4, "as": "value_band"}],
            "encoding": {"x": {"field": "value_band"}, "y": {"aggregate": "count"}}})),
        ("arc_band_share", _spec({"mark": "arc", "transforms": [
            {"op": "band", "field": q1, "quantiles": 4, "as": "value_band"}],
            "encoding": {"theta": {"aggregate": "count"},
                         "color": {"field": "value_band"}}})),
        ("derived_halved_strip", _spec({"mark": "point", "transforms": [
            {"op": "derive", "expr": f"{q1} / 2", "as": "halved"}],
            "encoding": {"x": {"field": "halved"}}})),
        ("line_profile", _spec({"mark": "line", "encoding": {
            "x": {"field": q1}, "y": {"field": q2}}})),
    ]
    if c1 is not None:
        specs += [
            ("mean_by_coarse_unit", _spec({"mark": "bar", "encoding": {
                "x": {"field": c1}, "y": {"field": q1, "aggregate": "mean"}}})),
            ("minmaxmean_by_unit", _spec({"mark": "line", "transforms": [
                {"op": "aggregate", "groupby": [c1], "ops": [
                    {"op": "min", "field": q1, "as": "value_min"},
                    {"op": "max", "field": q1, "as": "value_max"},
                    {"op": "mean", "field": q1, "as": "value_mean"}]}],
                "encoding": {"x": {"field": c1}, "y": {"field": "value_mean"}}})),
            ("count_by_coarse_unit", _spec({"mark": "bar", "encoding": {
                "x": {"field": c1}, "y": {"aggregate": "count"}}})),
            ("count_by_fine_unit", _spec({"mark": "bar", "encoding": {
                "x": {"field": c2}, "y": {"aggregate": "count"}}})),
            ("boxplot_by_unit", _spec({"mark": "boxplot", "encoding": {
                "x": {"field": c1}, "y": {"field": q1}}})),
        ]
    return specs


@dataclass(frozen=True)
class TensionReport:
    need_present: bool
    constraint_present: bool
    tension_estimate: float
    battery_size: int
    couplings: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"need_present": self.need_present,
                "constraint_present": self.constraint_present,
                "tension_estimate": self.tension_estimate,
                "battery_size": self.battery_size,
                "couplings": list(self.couplings)}


def verify_puzzle(dataset: Dataset, puzzle: PuzzleSpec,
                  params: RubricParams) -> TensionReport:
    """Certify a puzzle has both signals and genuine show-hide tension."""
    need_truth = ground_truth(dataset, puzzle.need, params)
    constraint_truth = ground_truth(dataset, puzzle.constraint, params)

    couplings = []
    scored = 0
    for name, spec in battery_specs(puzzle, dataset):
        if not validate_spec(spec, dataset.schema).ok:
            continue
        card = score(spec, dataset, puzzle, params)
        scored += 1
        if (card.need_adherence == Adherence.SATISFIED
                and card.constraint_adherence in (Adherence.RISKED, Adherence.BROKEN)):
            couplings.append(name)
    return TensionReport(
        need_present=need_truth.present(params),
        constraint_present=constraint_truth.present(params),
        tension_estimate=len(couplings) / scored if scored else 0.0,
        battery_size=scored,
        couplings=tuple(couplings),
    )


# --- bundle I/O ---------------------------------------------------------------------


def write_bundle(out_dir: str | Path, params: TemplateParams,
                 rubric: RubricParams | None = None) -> Path:
    """Emit dataset.csv, puzzle.json, tension.json, and a manifest into a directory."""
    rubric = rubric or RubricParams()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset, puzzle = gen_dataset(params)
    report = verify_puzzle(dataset, puzzle, rubric)
    (out / "dataset.csv").write_text(dataset.to_csv(), encoding="utf-8")
    (out / "puzzle.json").write_text(
        json.dumps(puzzle.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "tension.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    manifest = {
        "schema": [fs.to_dict() for fs in dataset.schema],
        "params": params.to_dict(),
        "rubric": rubric.to_dict(),
    }
    (out / "manifest.json").write_text(
        canonical_json(manifest) + "\n", encoding="utf-8")
    return out


def load_bundle(bundle_dir: str | Path) -> tuple[Dataset, PuzzleSpec, dict]:
    """Read a bundle directory back into (dataset, puzzle, manifest)."""
    bundle = Path(bundle_dir)
    manifest = json.loads((bundle / "manifest.json").read_text(encoding="utf-8"))
    schema = [FieldSchema.from_dict(d) for d in manifest["schema"]]
    dataset = load_dataset((bundle / "dataset.csv").read_text(encoding="utf-8"), schema)
    puzzle = load_puzzle((bundle / "puzzle.json").read_text(encoding="utf-8"), schema)
    return dataset, puzzle, manifest
