"""Exact subset-sum maximization and proportional rationing.

The dense simplex used by the multi-slot mechanisms lives in :mod:`powermech.simplex`.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

#: Largest item count solved by exhaustive enumeration.
EXHAUSTIVE_LIMIT = 20
#: Grid (kW) for the scaled dynamic program used above ``EXHAUSTIVE_LIMIT``.
DP_RESOLUTION = 1e-3

# Window (kW) for screening float64 subset sums before exact re-summation.
_SCREEN = 1e-7


def _mask_indices(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def _exhaustive(weights: list[float], capacity: float) -> tuple[tuple[int, ...], float]:
    # sums[m] = sum of weights in bitmask m, built by doubling
    sums = np.zeros(1)
    for w in weights:
        sums = np.concatenate([sums, sums + w])
    masks = np.flatnonzero(sums <= capacity + _SCREEN)
    order = masks[np.argsort(-sums[masks], kind="stable")]

    best_total = -1.0
    best_key = None
    for m in order:
        if sums[m] < best_total - _SCREEN:
            break
        idx = _mask_indices(int(m))
        total = math.fsum(weights[i] for i in idx)
        if total > capacity:
            continue
        if total > best_total or (total == best_total and idx < best_key):
            best_total, best_key = total, idx
    return best_key, best_total


def _scaled_dp(weights: list[float], capacity: float) -> tuple[tuple[int, ...], float]:
    scale = DP_RESOLUTION
    w_int = [int(round(w / scale)) for w in weights]
    cap = int(math.floor(capacity / scale + 1e-9))
    limit = (1 << (cap + 1)) - 1

    # suffix[k]: bitset of sums reachable using items k..n-1
    n = len(w_int)
    suffix = [0] * (n + 1)
    suffix[n] = 1
    for k in range(n - 1, -1, -1):
        suffix[k] = (suffix[k + 1] | (suffix[k + 1] << w_int[k])) & limit
    target = suffix[0].bit_length() - 1

    # lexicographically smallest index set reaching target: take the
    # earliest item whenever the remainder stays reachable from the suffix
    chosen = []
    rest = target
    for k in range(n):
        if rest == 0:
            break
        if w_int[k] <= rest and suffix[k + 1] >> (rest - w_int[k]) & 1:
            chosen.append(k)
            rest -= w_int[k]
    return tuple(chosen), math.fsum(weights[i] for i in chosen)


def subset_sum_max(weights: Sequence[float], capacity: float) -> tuple[tuple[int, ...], float]:
    """Largest subset total not exceeding ``capacity``.

    Returns ``(indices, total)``. Among equal totals the subset whose sorted
    index tuple is lexicographically smallest wins, so ``{}`` beats any set of
    zero-weight items. Totals are summed with :func:`math.fsum`, making them
    independent of summation order.

    Up to ``EXHAUSTIVE_LIMIT`` items the search is exhaustive and exact. Beyond
    that a dynamic program over weights rounded to ``DP_RESOLUTION`` kW is used;
    the result is then optimal for the rounded weights only.
    """
    weights = [float(w) for w in weights]
    capacity = float(capacity)
    if any(w < 0 for w in weights) or capacity < 0:
        raise ValueError("weights and capacity must be non-negative")
    if len(weights) <= EXHAUSTIVE_LIMIT:
        return _exhaustive(weights, capacity)
    return _scaled_dp(weights, capacity)


def proportional_ration(demands: Sequence[float], capacity: float) -> np.ndarray:
    """Scale demands down to ``capacity`` when their sum exceeds it.

    The identity is returned when the demands fit. Otherwise each grant is
    ``d_i * capacity / sum(d)`` and the last positive grant absorbs rounding so
    the grants sum to ``capacity``.
    """
    d = np.asarray(demands, dtype=float)
    if (d < 0).any() or capacity < 0:
        raise ValueError("demands and capacity must be non-negative")
    total = math.fsum(d)
    if total <= capacity:
        return d.copy()
    out = d * (capacity / total)
    last = np.flatnonzero(d > 0)[-1]
    out[last] = max(0.0, capacity - math.fsum(np.delete(out, last)))
    return out
