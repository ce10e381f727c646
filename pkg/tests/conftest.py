from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from showhide.data_model import Dataset, FieldSchema, load_dataset


@pytest.fixture
def simple_schema():
    return (FieldSchema("a", "quantitative"), FieldSchema("b", "nominal"))


@pytest.fixture
def gapped_dataset(simple_schema) -> Dataset:
    """Integers 1..100 with the open interval (40, 60) left empty."""
    values = [v for v in range(1, 101) if not (40 < v < 60)]
    csv = "a,b\n" + "\n".join(f"{v},{'N' if v % 2 else 'S'}" for v in values) + "\n"
    return load_dataset(csv, simple_schema)


@pytest.fixture
def outlier_dataset(simple_schema) -> Dataset:
    csv = "a,b\n1,N\n2,N\n3,S\n4,S\n100,S\n"
    return load_dataset(csv, simple_schema)


def make_dataset(columns: dict[str, list], kinds: dict[str, str]) -> Dataset:
    schema = tuple(FieldSchema(name, kinds[name]) for name in columns)
    n = len(next(iter(columns.values())))
    rows = tuple(tuple(columns[f.name][i] for f in schema) for i in range(n))
    return Dataset(schema=schema, rows=rows)
