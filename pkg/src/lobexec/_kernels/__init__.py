"""Hot-loop kernels with a compiled fast path and a pure-Python fallback.

The compiled extension (`lobexec._kernels._core`, built from Cython) is
preferred when importable; setting LOBEXEC_PURE=1 forces the fallback, which
the parity tests and the benchmark use. Both backends implement identical
contracts and produce identical Python-level outputs.

Row layout for a book with L levels per side (int64 throughout):
    columns [0, L)        bid prices, best first, strictly descending
    columns [L, 2L)       bid quantities
    columns [2L, 3L)      ask prices, best first, strictly ascending
    columns [3L, 4L)      ask quantities
Prices are tick-scaled integers, quantities lot-scaled integers.
"""

import os

if os.environ.get("LOBEXEC_PURE", "") not in ("", "0"):
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

market_walk = _impl.market_walk
limit_cross = _impl.limit_cross
limit_window = _impl.limit_window

__all__ = ["BACKEND", "market_walk", "limit_cross", "limit_window"]
