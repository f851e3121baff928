"""Backend selection for the numerical kernels.

The compiled extension is used when it imports; set ``HYBRIDCR_PURE=1`` to
force the pure-Python fallback.
"""

import os

BACKEND = "python"

if os.environ.get("HYBRIDCR_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import (  # noqa: F401
            close_pairs,
            goal_terms,
            limit_cycle_terms,
            min_distance_series,
            rk4_batch,
            rk4_unicycle,
        )

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import (  # noqa: F401
        close_pairs,
        goal_terms,
        limit_cycle_terms,
        min_distance_series,
        rk4_batch,
        rk4_unicycle,
    )

__all__ = [
    "BACKEND",
    "close_pairs",
    "goal_terms",
    "limit_cycle_terms",
    "min_distance_series",
    "rk4_batch",
    "rk4_unicycle",
]
