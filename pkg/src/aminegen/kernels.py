"""Kernel backend selection.

The AMINEGEN_KERNELS environment variable picks the implementation:
"numba" (default when importable) or "numpy" (pure-numpy fallback).
Both backends produce identical results; benchmarks/bench_kernels.py
compares their speed.
"""

from __future__ import annotations

import os

_requested = os.environ.get("AMINEGEN_KERNELS", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(
        f"AMINEGEN_KERNELS must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    from . import kernels_numpy as _impl
else:
    try:
        from . import kernels_numba as _impl
    except ImportError:
        if _requested == "numba":
            raise
        from . import kernels_numpy as _impl

BACKEND = _impl.BACKEND
popcount = _impl.popcount
tanimoto_pair = _impl.tanimoto_pair
sims_one_to_many = _impl.sims_one_to_many
max_sims_to_targets = _impl.max_sims_to_targets
sphere_exclusion_count = _impl.sphere_exclusion_count
