"""Scan kernels, compiled when available.

Import preference: the Cython extension, unless ODBX_PURE is set in the
environment or the build produced no extension; then the pure-Python
fallback. `BACKEND` names which one is live.
"""

import os

if os.environ.get("ODBX_PURE"):
    from ._fallback import closest_prev, count_matches, scan_words
    BACKEND = "pure"
else:
    try:
        from ._native import closest_prev, count_matches, scan_words
        BACKEND = "native"
    except ImportError:
        from ._fallback import closest_prev, count_matches, scan_words
        BACKEND = "pure"

__all__ = ["scan_words", "count_matches", "closest_prev", "BACKEND"]
