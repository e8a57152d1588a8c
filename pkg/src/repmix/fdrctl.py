"""Lfdr step-up rule and the estimated-FDP view of it.

Rejections are always made at a threshold on the Lfdr scale, so features
sharing the threshold value are rejected together.  The step-up cut is
therefore the largest prefix of the sorted values that ends at a change of
value and whose mean Lfdr is at most ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# relative slack on the prefix-mean comparison so that exact ties with alpha
# survive summation round-off
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class RejectionResult:
    reject: np.ndarray
    lfdr_values: np.ndarray
    k_rejected: int
    lambda_hat: float
    estimated_fdp: float
    alpha: float


def _as_lfdr(values):
    v = np.asarray(values, dtype=float).ravel()
    if np.any(~((v >= 0.0) & (v <= 1.0))):
        raise ValueError("Lfdr values must lie in [0, 1]")
    return v


def _cut(sorted_values, alpha):
    """Number of rejections for ascending ``sorted_values``."""
    m = sorted_values.size
    k = np.arange(1, m + 1)
    csum = np.cumsum(sorted_values)
    passes = csum <= alpha * k * (1.0 + TIE_RTOL)
    # only cuts between distinct values are admissible
    boundary = np.ones(m, dtype=bool)
    boundary[:-1] = sorted_values[:-1] < sorted_values[1:]
    ok = np.flatnonzero(passes & boundary)
    if ok.size == 0:
        return 0, 0.0
    j = int(ok[-1])
    return j + 1, float(csum[j] / (j + 1))


def step_up(lfdr_values, alpha: float) -> RejectionResult:
    """Reject the largest set of smallest Lfdr values with mean at most ``alpha``."""
    v = _as_lfdr(lfdr_values)
    if v.size == 0:
        raise ValueError("step_up needs at least one value")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    order = np.argsort(v, kind="stable")
    sv = v[order]
    k, fdp = _cut(sv, alpha)
    reject = np.zeros(v.size, dtype=bool)
    reject[order[:k]] = True
    lam = float(sv[k - 1]) if k else 0.0
    return RejectionResult(reject, v, k, lam, fdp, alpha)


def estimated_fdp_at(lfdr_values, lam: float) -> float:
    """Mean Lfdr among values at most ``lam``; 0 when none qualifies."""
    v = _as_lfdr(lfdr_values)
    sel = v <= lam
    n = int(np.count_nonzero(sel))
    return float(v[sel].sum() / n) if n else 0.0


def critical_value(lfdr_values, alpha: float) -> float:
    """Largest threshold, among 0 and the observed values, with estimated FDP <= alpha."""
    v = np.sort(_as_lfdr(lfdr_values))
    if v.size == 0:
        return 0.0
    csum = np.cumsum(v)
    count = np.arange(1, v.size + 1)
    # candidate thresholds sit at the last copy of each distinct value
    last = np.append(v[:-1] < v[1:], True)
    ok = last & (csum <= alpha * count * (1.0 + TIE_RTOL))
    return float(v[ok][-1]) if ok.any() else 0.0
