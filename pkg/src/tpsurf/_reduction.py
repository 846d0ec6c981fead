"""Order-invariant floating-point reduction.

The deterministic reduction used by the energy kernels is an
exponent-binned ("extract and accumulate") sum: every addend is split
into three slices aligned to power-of-two grids chosen from the running
maximum, each slice sums exactly in double precision, and the three
exact partial sums are combined in a fixed order.  The result is
bit-identical under any permutation of the addends and under any
partitioning of the work across threads, which is what makes reports
byte-stable across thread counts.
"""

from __future__ import annotations

import math

import numpy as np

_FOLDS = 3


def reproducible_sum(values) -> float:
    """Sum `values` with a result independent of their order.

    Accurate to the last ulp of the true sum for up to ~2**25 addends.
    Non-finite inputs fall back to a plain sum (the result is then
    inf/nan regardless of order).
    """
    v = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return 0.0
    if not np.isfinite(v).all():
        return float(np.sum(v))
    total = 0.0
    r = v
    for _ in range(_FOLDS):
        m = float(np.max(np.abs(r)))
        if m == 0.0:
            break
        # power-of-two scale with |partial sums| guaranteed < scale
        scale = math.ldexp(1.0, int(math.ceil(math.log2(m))) + int(math.ceil(math.log2(r.size + 1))) + 1)
        chunk = (r + scale) - scale  # round each addend to the grid ulp(scale)/2
        total += float(np.sum(chunk))  # exact: all addends on one grid, no overflow
        r = r - chunk
    return total


def reproducible_sum_pair(values_a, values_b) -> tuple[float, float]:
    """Convenience wrapper summing two arrays independently."""
    return reproducible_sum(values_a), reproducible_sum(values_b)
