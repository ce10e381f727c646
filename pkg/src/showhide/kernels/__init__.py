"""Numeric kernels with a compiled fast path.

Imports the Cython extension when present, otherwise the numpy fallback.
Set SHOWHIDE_PURE_PYTHON=1 to force the fallback (used by the benchmark
and by CI to exercise both paths).
"""

from __future__ import annotations

import os

if os.environ.get("SHOWHIDE_PURE_PYTHON"):
    from . import _fallback as _impl

    BACKEND = "fallback"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        from . import _fallback as _impl

        BACKEND = "fallback"

quantile_sorted = _impl.quantile_sorted
gaussian_kde = _impl.gaussian_kde
bin_counts = _impl.bin_counts
gap_scan = _impl.gap_scan
trapezoid = _impl.trapezoid

__all__ = [
    "BACKEND",
    "quantile_sorted",
    "gaussian_kde",
    "bin_counts",
    "gap_scan",
    "trapezoid",
]
