"""Canonical serialization and hashing helpers.

Determinism contracts (replay equality, evaluate hash equality) all reduce
to "same canonical JSON bytes", so every module funnels through here.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and no whitespace; rejects NaN/inf."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def canonical_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def is_finite_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    """Strict-mode key check: unknown keys and missing required keys both fail."""
    from .errors import ParseError

    if not isinstance(obj, dict):
        raise ParseError(where, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(where, f"unknown keys: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ParseError(where, f"missing keys: {sorted(missing)}")
