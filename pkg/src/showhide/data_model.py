"""Datasets, field schemas, domains, and puzzle definitions.

Tabular inputs are immutable after construction: rows are tuples aligned to
the schema order, row ids are positional (0..n-1) and never taken from a
data column, so provenance stays independent of identifier fields.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Sequence

from .errors import (
    BindingError,
    CellTypeError,
    EmptyDomainError,
    MissingColumnError,
    ParseError,
    UnknownFieldError,
)
from .utils import require_keys

KINDS = ("quantitative", "nominal", "ordinal", "temporal")


class SignalKind(str, enum.Enum):
    GAP = "Gap"
    PEAK = "Peak"
    OUTLIER = "Outlier"
    SATURATION = "Saturation"
    INDIVIDUAL_POINT = "IndividualPoint"
    INDIVIDUAL_LOCATION = "IndividualLocation"


@dataclass(frozen=True)
class FieldSchema:
    name: str
    kind: str
    units: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"field {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_quantitative(self) -> bool:
        # temporal values are parsed to epoch seconds and behave as numbers
        return self.kind in ("quantitative", "temporal")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.units is not None:
            d["units"] = self.units
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSchema":
        return cls(name=d["name"], kind=d["kind"], units=d.get("units"))


def _parse_quantitative(raw: str, row: int, name: str, temporal: bool) -> float:
    if temporal:
        try:
            ts = datetime.fromisoformat(raw)
        except ValueError:
            raise CellTypeError(row, name, raw) from None
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        return ts.timestamp()
    try:
        value = float(raw)
    except ValueError:
        raise CellTypeError(row, name, raw) from None
    if not math.isfinite(value):
        raise CellTypeError(row, name, raw)
    return value


@dataclass(frozen=True)
class Dataset:
    """An immutable table; row ids are the positions 0..n-1."""

    schema: tuple[FieldSchema, ...]
    rows: tuple[tuple[Any, ...], ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = [f.name for f in self.schema]
        if len(set(names)) != len(names):
            raise ValueError("duplicate field names in schema")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def field_schema(self, name: str) -> FieldSchema:
        try:
            return self.schema[self._index[name]]
        except KeyError:
            raise UnknownFieldError(name) from None

    def column(self, name: str) -> list[Any]:
        idx = self._index.get(name)
        if idx is None:
            raise UnknownFieldError(name)
        return [r[idx] for r in self.rows]

    def value(self, row: int, name: str) -> Any:
        idx = self._index.get(name)
        if idx is None:
            raise UnknownFieldError(name)
        return self.rows[row][idx]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in self.schema]
        writer.writerow(names)
        for row in self.rows:
            out = []
            for fs, v in zip(self.schema, row):
                if v is None:
                    out.append("")
                elif fs.kind == "temporal":
                    out.append(datetime.fromtimestamp(v, tz=timezone.utc).isoformat())
                elif fs.is_quantitative:
                    out.append(format_number(v))
                else:
                    out.append(str(v))
            writer.writerow(out)
        return buf.getvalue()


def format_number(v: float) -> str:
    """Render a float compactly; integers lose the trailing .0."""
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return repr(float(v))


def load_dataset(csv_text: str, schema: Sequence[FieldSchema]) -> Dataset:
    """Parse CSV into a Dataset; empty cells become explicit nulls.

    The header must name exactly the schema fields (any order); row order
    follows file order.
    """
    schema = tuple(schema)
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumnError(schema[0].name if schema else "<any>") from None
    positions = {}
    for fs in schema:
        if fs.name not in header:
            raise MissingColumnError(fs.name)
        positions[fs.name] = header.index(fs.name)

    rows: list[tuple[Any, ...]] = []
    for i, raw_row in enumerate(reader):
        if not raw_row or (len(raw_row) == 1 and raw_row[0] == ""):
            continue  # ignore trailing blank lines
        values: list[Any] = []
        for fs in schema:
            pos = positions[fs.name]
            raw = raw_row[pos].strip() if pos < len(raw_row) else ""
            if raw == "":
                values.append(None)
            elif fs.is_quantitative:
                values.append(_parse_quantitative(raw, i, fs.name, fs.kind == "temporal"))
            else:
                values.append(raw)
        rows.append(tuple(values))
    return Dataset(schema=schema, rows=tuple(rows))


@dataclass(frozen=True)
class Domain:
    """Value domain of a field or channel.

    Quantitative domains carry (lo, hi); categorical ones carry the
    distinct values in first-appearance order.
    """

    lo: float | None = None
    hi: float | None = None
    categories: tuple[str, ...] | None = None

    @property
    def is_quantitative(self) -> bool:
        return self.categories is None

    @property
    def width(self) -> float:
        if not self.is_quantitative:
            raise ValueError("categorical domain has no width")
        return self.hi - self.lo

    def to_dict(self) -> dict:
        if self.is_quantitative:
            return {"lo": self.lo, "hi": self.hi}
        return {"categories": list(self.categories)}


def field_domain(dataset: Dataset, name: str) -> Domain:
    """Domain over the non-null values of one field."""
    fs = dataset.field_schema(name)
    values = [v for v in dataset.column(name) if v is not None]
    if not values:
        raise EmptyDomainError(name)
    if fs.is_quantitative:
        return Domain(lo=min(values), hi=max(values))
    seen: dict[str, None] = {}
    for v in values:
        seen.setdefault(v, None)
    return Domain(categories=tuple(seen))


@dataclass(frozen=True)
class SignalBinding:
    signal_kind: SignalKind
    relevant_fields: tuple[str, ...]

    def __post_init__(self):
        if not self.relevant_fields:
            raise BindingError("relevant_fields must be non-empty")

    def validate_against(self, schema: Iterable[FieldSchema]) -> None:
        names = {f.name for f in schema}
        for f in self.relevant_fields:
            if f not in names:
                raise BindingError(f"signal field {f!r} not in dataset schema")

    def to_dict(self) -> dict:
        return {"signal": self.signal_kind.value, "fields": list(self.relevant_fields)}


@dataclass(frozen=True)
class PuzzleSpec:
    id: str
    title: str
    setting_text: str
    receiver_prompt: str
    sender_prompt: str
    dataset_ref: str
    need: SignalBinding
    constraint: SignalBinding

    def __post_init__(self):
        same_kind = self.need.signal_kind == self.constraint.signal_kind
        same_fields = set(self.need.relevant_fields) == set(self.constraint.relevant_fields)
        if same_kind and same_fields:
            raise BindingError("need and constraint must pair two distinct signals")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "setting": self.setting_text,
            "receiver_prompt": self.receiver_prompt,
            "sender_prompt": self.sender_prompt,
            "dataset": self.dataset_ref,
            "need": self.need.to_dict(),
            "constraint": self.constraint.to_dict(),
        }


_PUZZLE_KEYS = {"id", "title", "setting", "receiver_prompt", "sender_prompt",
                "dataset", "need", "constraint"}


def _parse_binding(obj: dict, where: str) -> SignalBinding:
    require_keys(obj, {"signal", "fields"}, {"signal", "fields"}, where)
    try:
        kind = SignalKind(obj["signal"])
    except ValueError:
        raise ParseError(where, f"unknown signal kind {obj['signal']!r}") from None
    fields = obj["fields"]
    if not isinstance(fields, list) or not all(isinstance(f, str) for f in fields):
        raise ParseError(where, "fields must be a list of names")
    if not fields:
        raise BindingError(f"{where}: fields must be non-empty")
    return SignalBinding(signal_kind=kind, relevant_fields=tuple(fields))


def load_puzzle(text: str, schema: Sequence[FieldSchema] | None = None) -> PuzzleSpec:
    """Parse a puzzle document and validate its bindings.

    When `schema` is given, every relevant field must exist in it.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}", exc.msg) from None
    require_keys(obj, _PUZZLE_KEYS, _PUZZLE_KEYS, "puzzle")
    need = _parse_binding(obj["need"], "puzzle.need")
    constraint = _parse_binding(obj["constraint"], "puzzle.constraint")
    puzzle = PuzzleSpec(
        id=str(obj["id"]),
        title=obj["title"],
        setting_text=obj["setting"],
        receiver_prompt=obj["receiver_prompt"],
        sender_prompt=obj["sender_prompt"],
        dataset_ref=obj["dataset"],
        need=need,
        constraint=constraint,
    )
    if schema is not None:
        need.validate_against(schema)
        constraint.validate_against(schema)
    return puzzle
