"""Summation helpers shared by the path and covariance code."""
import math
from typing import Sequence

import numpy as np

BLOCK = 1024


def compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """
    Cumulative sums with blockwise compensation.

    Each block of ``BLOCK`` terms is summed by np.cumsum; block offsets are
    carried by correctly rounded ``math.fsum`` prefix totals, so the error
    never grows with the path length.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n == 0:
        return np.zeros(0)
    out = np.empty(n)
    partials = []
    offset = 0.0
    for start in range(0, n, BLOCK):
        block = values[start:start + BLOCK]
        out[start:start + BLOCK] = offset + np.cumsum(block)
        partials.extend(block.tolist())
        offset = math.fsum(partials)
        partials = [offset]
    return out


def ordered_sum(values: Sequence[float]) -> float:
    """Neumaier summation in the given order (bit-reproducible reductions)."""
    total = 0.0
    comp = 0.0
    for v in values:
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def geometric_tail(shells: Sequence[float], window: int = 10) -> float:
    """
    Extrapolated remainder sum_{u > U} |s_u| from the last ``window`` shells.

    Returns 0 when the series has already vanished, inf when the measured
    decay ratio is not below one.
    """
    tail = [abs(s) for s in shells[-window:]]
    if not tail or tail[-1] == 0.0:
        return 0.0
    if len(tail) < 2 or tail[0] == 0.0:
        return math.inf
    ratio = (tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1))
    if not ratio < 1.0:
        return math.inf
    return tail[-1] * ratio / (1.0 - ratio)
