"""Slow reference computations used by ``repmix selftest`` and the tests.

None of these share code with the production paths they check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def _sorted_merged(points, weights):
    pts = sorted(zip(points, weights))
    xs, ws = [], []
    for x, w in pts:
        if xs and x - xs[-1] <= 1e-12:
            ws[-1] += w
        else:
            xs.append(x)
            ws.append(w)
    return np.array(xs), np.array(ws)


def _loglik(ws, heights):
    total = 0.0
    for w, h in zip(ws, heights):
        if w > 0:
            if h <= 0:
                return -math.inf
            total += w * math.log(h)
    return total


def block_partition_mle(points, weights):
    """Exhaustive search over contiguous block partitions of the sorted points.

    Every partition gets the closed-form heights ``sum(w) / (W * sum(gap))``;
    partitions whose heights are not non-increasing are discarded.  Returns
    ``(best log-likelihood, heights at the sorted distinct points)``.
    """
    xs, ws = _sorted_merged(points, weights)
    n = xs.size
    gaps = np.diff(xs, prepend=0.0)
    W = ws.sum()
    best = (-math.inf, None)
    for cuts in itertools.product((False, True), repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        heights = np.empty(n)
        prev = math.inf
        ok = True
        for a, b in zip(bounds[:-1], bounds[1:]):
            h = ws[a:b].sum() / (W * gaps[a:b].sum())
            if h > prev:
                ok = False
                break
            heights[a:b] = h
            prev = h
        if not ok:
            continue
        ll = _loglik(ws, heights)
        if ll > best[0]:
            best = (ll, heights)
    return best


def maxmin_heights(points, weights):
    """Heights from the max-min formula on the reciprocal scale.

    ``u_i = max_{b >= i} min_{a <= i} -W sum(gap[a..b]) / sum(w[a..b])`` and
    ``f(x_(i)) = -1 / u_i``.  Requires every weight to be positive.
    """
    xs, ws = _sorted_merged(points, weights)
    n = xs.size
    gaps = np.diff(xs, prepend=0.0)
    W = ws.sum()
    u = np.empty(n)
    for i in range(n):
        u[i] = max(
            min(-W * gaps[a : b + 1].sum() / ws[a : b + 1].sum() for a in range(i + 1))
            for b in range(i, n)
        )
    return -1.0 / u


def stepup_bruteforce(values, alpha, grid_denominator=None):
    """Largest rejection set ``{v <= t}`` whose mean is at most ``alpha``.

    Thresholds range over the observed values.  With ``grid_denominator``
    the values are treated as exact multiples ``k / grid_denominator`` and
    compared in integer arithmetic.
    """
    v = list(values)
    best = 0
    for t in sorted(set(v)):
        chosen = [x for x in v if x <= t]
        if grid_denominator is None:
            ok = sum(chosen) <= alpha * len(chosen)
        else:
            num = sum(round(x * grid_denominator) for x in chosen)
            ok = num <= round(alpha * grid_denominator) * len(chosen)
        if ok:
            best = len(chosen)
    return best
