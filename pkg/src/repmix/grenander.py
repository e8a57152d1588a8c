"""Weighted Grenander estimator and the pool-adjacent-violators kernel.

The M-step for each signal density solves

    maximize  sum_i w_i log f(x_i)
    over non-increasing densities f on (0, 1).

With the points sorted and gaps ``d_i = x_(i) - x_(i-1)`` the maximizer is a
step function whose height on a pooled block ``[a, b]`` is
``sum(w[a:b]) / (W * sum(d[a:b]))``.  The blocks are those of the antitonic
least-squares fit of ``w_i / (W d_i)`` with weights ``d_i``; this gives the
same max-min block averages as the reciprocal-scale formulation but stays
finite when some weights are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import DegenerateSampleError
from .model import MonotoneStepDensity

TIE_TOL = 1e-12
WEIGHT_FLOOR = 1e-12

NON_INCREASING = "non-increasing"
NON_DECREASING = "non-decreasing"


@njit(cache=True)
def _pava_decreasing(y, w):
    # stack-based PAVA, all weights must be positive
    n = y.shape[0]
    val = np.empty(n)
    wt = np.empty(n)
    cnt = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        val[top] = y[i]
        wt[top] = w[i]
        cnt[top] = 1
        while top > 0 and val[top - 1] < val[top]:
            tw = wt[top - 1] + wt[top]
            val[top - 1] = (wt[top - 1] * val[top - 1] + wt[top] * val[top]) / tw
            wt[top - 1] = tw
            cnt[top - 1] += cnt[top]
            top -= 1
    out = np.empty(n)
    pos = 0
    for b in range(top + 1):
        for _ in range(cnt[b]):
            out[pos] = val[b]
            pos += 1
    return out


@njit(cache=True)
def _grenander_blocks(wsum, gaps):
    # pools on the ratio sum(w)/sum(gap) directly so block heights are exact
    n = wsum.shape[0]
    bw = np.empty(n)
    bg = np.empty(n)
    end = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        bw[top] = wsum[i]
        bg[top] = gaps[i]
        end[top] = i
        while top > 0 and bw[top - 1] * bg[top] < bw[top] * bg[top - 1]:
            bw[top - 1] += bw[top]
            bg[top - 1] += bg[top]
            end[top - 1] = end[top]
            top -= 1
    return bw[: top + 1].copy(), bg[: top + 1].copy(), end[: top + 1].copy()


def pava_isotonic(targets, weights, direction=NON_INCREASING):
    """Weighted least-squares projection of ``targets`` onto a monotone cone.

    Parameters
    ----------
    targets, weights : array_like
        Equal-length sequences; weights must be non-negative and not all zero.
    direction : {"non-increasing", "non-decreasing"}

    Returns
    -------
    numpy.ndarray
        Fitted values; each pooled block holds the weighted mean of its
        targets.  Zero-weight positions copy the value of the nearest
        preceding positive-weight position (the following one if none
        precedes), which is one of the minimizers.
    """
    y = np.asarray(targets, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if y.size != w.size:
        raise ValueError(f"targets has length {y.size} but weights has length {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if direction not in (NON_INCREASING, NON_DECREASING):
        raise ValueError(f"unknown direction {direction!r}")
    pos = w > 0
    if not pos.any():
        raise DegenerateSampleError("all weights are zero")
    sign = 1.0 if direction == NON_INCREASING else -1.0
    fitted = sign * _pava_decreasing(sign * y[pos], w[pos])
    if pos.all():
        return fitted
    out = np.empty_like(y)
    out[pos] = fitted
    # forward fill, then back fill the leading gap
    idx = np.where(pos, np.arange(y.size), -1)
    idx = np.maximum.accumulate(idx)
    first = np.flatnonzero(pos)[0]
    idx[idx < 0] = first
    return out[idx]


@dataclass(frozen=True)
class WeightedSample:
    """Points in (0, 1) with non-negative weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.size != w.size:
            raise ValueError("points and weights differ in length")
        if x.size == 0 or np.any(~((x > 0) & (x < 1))):
            raise ValueError("points must be a non-empty sequence inside (0, 1)")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "weights", w)


class SortedColumn:
    """Sorted, de-duplicated view of one column of p-values.

    Built once per fit so that repeated density updates only pay for the
    weight aggregation and the PAVA pass.
    """

    def __init__(self, points):
        x = np.asarray(points, dtype=float).ravel()
        order = np.argsort(x, kind="stable")
        xs = x[order]
        # points within TIE_TOL of their predecessor start no new group
        new_group = np.empty(xs.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = np.diff(xs) > TIE_TOL
        group_of_sorted = np.cumsum(new_group) - 1
        # last member of each group is the right end of its step
        ends = np.append(np.flatnonzero(new_group)[1:] - 1, xs.size - 1)
        self.unique = xs[ends]
        self.gaps = np.diff(self.unique, prepend=0.0)
        self.group = np.empty(x.size, dtype=np.int64)
        self.group[order] = group_of_sorted
        self.n_groups = int(self.unique.size)

    def fit(self, weights):
        """Return ``(density, fitted values at the original points)``."""
        w = np.asarray(weights, dtype=float)
        w = np.where(w < WEIGHT_FLOOR, 0.0, w)
        wsum = np.bincount(self.group, weights=w, minlength=self.n_groups)
        total = float(wsum.sum())
        if not total > 0.0:
            raise DegenerateSampleError("sample carries no positive weight")
        bw, bg, end = _grenander_blocks(wsum, self.gaps)
        # guard against one-ulp inversions from the division
        heights = np.minimum.accumulate(bw / (total * bg))
        knots = self.unique[end]
        density = MonotoneStepDensity(knots, heights)
        block_of_group = np.repeat(np.arange(end.size), np.diff(end, prepend=-1))
        return density, heights[block_of_group][self.group]


def weighted_monotone_mle(sample: WeightedSample) -> MonotoneStepDensity:
    """Weighted maximum-likelihood non-increasing density on (0, 1).

    Duplicate points (within ``1e-12``) are merged with their weights summed
    and weights below ``1e-12`` count as zero.  The returned step function
    has one knot per pooled block; it is zero beyond the largest point.
    """
    density, _ = SortedColumn(sample.points).fit(sample.weights)
    return density


def weighted_loglik(density, points, weights) -> float:
    """``sum w_i log f(x_i)`` with the ``0 log 0 = 0`` convention."""
    w = np.asarray(weights, dtype=float)
    f = np.asarray(density(np.asarray(points, dtype=float)), dtype=float)
    pos = w > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(w[pos] * np.log(f[pos])))
