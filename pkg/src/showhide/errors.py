"""Exception types shared across the package.

Every error a caller is expected to catch derives from ShowHideError, so
service handlers can translate them into wire errors in one place.
"""

from __future__ import annotations


class ShowHideError(Exception):
    """Base class for all package-level errors."""


# --- dataset / puzzle loading ------------------------------------------------

class MissingColumnError(ShowHideError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"CSV is missing schema column {name!r}")


class CellTypeError(ShowHideError):
    """A quantitative cell failed to parse as a number."""

    def __init__(self, row: int, field: str, value: str = ""):
        self.row = row
        self.field = field
        self.value = value
        super().__init__(f"row {row}, field {field!r}: not a number: {value!r}")


class UnknownFieldError(ShowHideError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"unknown field {field!r}")


class EmptyDomainError(ShowHideError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"field {field!r} has no non-null values")


class ParseError(ShowHideError):
    """Malformed chart-spec or puzzle document."""

    def __init__(self, position: str, message: str):
        self.position = position
        super().__init__(f"{position}: {message}")


class UnknownMarkError(ParseError):
    def __init__(self, mark: str):
        self.mark = mark
        super().__init__("mark", f"unknown mark type {mark!r}")


class UnknownTransformError(ParseError):
    def __init__(self, op: str):
        self.op = op
        super().__init__("transforms", f"unknown transform op {op!r}")


class BindingError(ShowHideError):
    pass


# --- evaluation / rubric -----------------------------------------------------

class EvalError(ShowHideError):
    def __init__(self, step: str, message: str):
        self.step = step
        super().__init__(f"{step}: {message}")


class EmptyInputError(ShowHideError):
    pass


class DegenerateInputError(ShowHideError):
    """KDE input with fewer than two distinct values."""


class DegenerateDataError(ShowHideError):
    """Too few non-null values to extract a signal ground truth."""


class DatasetMismatchError(ShowHideError):
    """View provenance references rows outside the dataset."""


class InfeasiblePlantError(ShowHideError):
    """Requested planted signals contradict each other."""


# --- game / service ----------------------------------------------------------

class RosterSizeError(ShowHideError):
    def __init__(self, size: int):
        self.size = size
        super().__init__(f"roster size {size} is not divisible by 3")


class UnknownPlayerError(ShowHideError):
    def __init__(self, player: str):
        self.player = player
        super().__init__(f"unknown player {player!r}")


class IllegalEventError(ShowHideError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        msg = reason if not detail else f"{reason}: {detail}"
        super().__init__(msg)


class CorruptLogError(ShowHideError):
    def __init__(self, seq: int, detail: str = ""):
        self.seq = seq
        msg = f"event log corrupt at seq {seq}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class RoundNotCompleteError(ShowHideError):
    pass


class ForbiddenError(ShowHideError):
    pass
