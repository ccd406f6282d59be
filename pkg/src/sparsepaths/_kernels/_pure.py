"""NumPy fallback for the per-row projection kernels."""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError
from ..simplex import _bisection_core, _quadratic_core


def policy_rows(aug_cost, ref, indptr, r, T, skip, out):
    """Solve the simplex projection on every CSR row.

    Writes the row distributions into ``out`` (aligned with ``aug_cost``),
    zeroing row ``skip``.  Returns -1 on success or the index of the first
    row whose bisection failed.
    """
    n = indptr.size - 1
    for i in range(n):
        a, b = indptr[i], indptr[i + 1]
        if i == skip:
            out[a:b] = 0.0
            continue
        try:
            if r == 2.0:
                p, _ = _quadratic_core(aug_cost[a:b], ref[a:b], T)
            else:
                p, _, _ = _bisection_core(aug_cost[a:b], ref[a:b], r, T)
        except ConvergenceError:
            return i
        out[a:b] = p
    return -1
