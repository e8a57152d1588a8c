"""Competing replicability procedures and Storey-type proportion estimators.

All procedures take a :class:`~repmix.model.PairedPValueSet` and return a
:class:`BaselineResult` whose ``reject`` flags follow the input feature
order.  Sorting is always stable, so tied statistics are ordered by their
original index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import PairedPValueSet

ADHOC_BH = "adhoc-bh"
MAXP = "maxp"
JUMP = "jump"
MARR = "marr"
RADJUST = "radjust"
METHODS = (ADHOC_BH, MAXP, JUMP, MARR, RADJUST)

LAMBDA_GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)


@dataclass(frozen=True)
class BaselineResult:
    method: str
    reject: np.ndarray
    auxiliary: dict = field(default_factory=dict)

    @property
    def n_rejected(self) -> int:
        return int(np.count_nonzero(self.reject))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def bh(pvalues, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up; returns rejection flags in input order."""
    p = np.asarray(pvalues, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("bh needs at least one p-value")
    _check_alpha(alpha)
    m = p.size
    order = np.argsort(p, kind="stable")
    below = p[order] <= np.arange(1, m + 1) * alpha / m
    reject = np.zeros(m, dtype=bool)
    if below.any():
        k = int(np.flatnonzero(below)[-1]) + 1
        reject[order[:k]] = True
    return reject


def adhoc_bh(data: PairedPValueSet, alpha: float) -> BaselineResult:
    """Declare replicable the features BH rejects in both studies."""
    r1 = bh(data.p1, alpha)
    r2 = bh(data.p2, alpha)
    return BaselineResult(
        ADHOC_BH, r1 & r2, {"rejected_study1": int(r1.sum()), "rejected_study2": int(r2.sum())}
    )


def maxp(data: PairedPValueSet, alpha: float) -> BaselineResult:
    q = np.maximum(data.p1, data.p2)
    return BaselineResult(MAXP, bh(q, alpha))


def storey_pi0(pvalues, lam: float) -> float:
    """Storey's null-proportion estimate #{p >= lam} / (m (1 - lam))."""
    p = np.asarray(pvalues, dtype=float)
    return float(np.count_nonzero(p >= lam)) / (p.size * (1.0 - lam))


def joint_xi00(data: PairedPValueSet, lambda3: float) -> float:
    """Joint-null estimate #{p1 >= lam, p2 >= lam} / (m (1 - lam)^2); may exceed 1."""
    hits = np.count_nonzero((data.p1 >= lambda3) & (data.p2 >= lambda3))
    return float(hits) / (data.m * (1.0 - lambda3) ** 2)


def _smoothed(estimator, grid=LAMBDA_GRID):
    # cubic least-squares fit over the lambda grid, read off at the largest lambda
    values = np.array([estimator(lam) for lam in grid])
    coef = np.polyfit(grid, values, 3)
    return float(min(max(np.polyval(coef, grid[-1]), 0.0), 1.0))


def pi0_estimate(pvalues, lam) -> float:
    """Storey estimate at a fixed ``lam`` or, for ``"auto"``, the smoothed one."""
    if lam == "auto":
        return _smoothed(lambda l: storey_pi0(pvalues, l))
    return storey_pi0(pvalues, float(lam))


def xi00_estimate(data: PairedPValueSet, lam) -> float:
    if lam == "auto":
        return _smoothed(lambda l: joint_xi00(data, l))
    return joint_xi00(data, float(lam))


def storey_xi(data: PairedPValueSet, lambda1=0.5, lambda2=0.5, lambda3=0.5) -> np.ndarray:
    """Unclipped moment estimates (xi00, xi01, xi10, xi11).

    ``xi01 = pi0(study 1) - xi00`` and ``xi10 = pi0(study 2) - xi00``; the
    remaining mass goes to ``xi11``.  Components can be negative.
    """
    pi1 = pi0_estimate(data.p1, lambda1)
    pi2 = pi0_estimate(data.p2, lambda2)
    x00 = xi00_estimate(data, lambda3)
    x01 = pi1 - x00
    x10 = pi2 - x00
    return np.array([x00, x01, x10, 1.0 - x00 - x01 - x10])


def jump_fdr_hat(t, xi00, xi01, xi10, n_below, m):
    """Plug-in FDR estimate m (xi00 t^2 + (xi01 + xi10) t) / max(R(t), 1)."""
    t = np.asarray(t, dtype=float)
    return m * (xi00 * t * t + (xi01 + xi10) * t) / np.maximum(n_below, 1)


def jump(data: PairedPValueSet, alpha: float, lambdas=(0.5, 0.5, 0.5)) -> BaselineResult:
    """Step-up on max p-values with a composite-null plug-in FDR estimate."""
    _check_alpha(alpha)
    if lambdas == "auto":
        lambdas = ("auto", "auto", "auto")
    raw = storey_xi(data, *lambdas)
    xi00 = raw[0]
    xi01 = max(raw[1], 0.0)
    xi10 = max(raw[2], 0.0)
    pmax = np.maximum(data.p1, data.p2)
    m = data.m
    order = np.argsort(pmax, kind="stable")
    t = pmax[order]
    n_below = np.searchsorted(t, t, side="right")
    ok = jump_fdr_hat(t, xi00, xi01, xi10, n_below, m) <= alpha
    k = int(np.flatnonzero(ok)[-1]) + 1 if ok.any() else 0
    reject = np.zeros(m, dtype=bool)
    reject[order[:k]] = True
    return BaselineResult(
        JUMP, reject, {"xi00": xi00, "xi01": xi01, "xi10": xi10, "k_hat": k}
    )


def ranks(p) -> np.ndarray:
    """Ordinal ranks 1..m, ties broken by original position."""
    p = np.asarray(p, dtype=float)
    r = np.empty(p.size, dtype=np.int64)
    r[np.argsort(p, kind="stable")] = np.arange(1, p.size + 1)
    return r


def marr_null_survival(x, pi1):
    """Limiting null survival of the scaled maximum rank."""
    x = np.asarray(x, dtype=float)
    inner = 1.0 - (x - pi1) ** 2 / (1.0 - pi1) ** 2
    out = np.where(x < pi1, 1.0, np.where(x <= 1.0, inner, 0.0))
    return out if out.ndim else float(out)


def marr_empirical_survival(max_ranks, x):
    """(1/m) #{M_i / m >= x}."""
    M = np.asarray(max_ranks)
    m = M.size
    x = np.asarray(x, dtype=float)
    return np.count_nonzero(M[:, None] / m >= np.atleast_1d(x)[None, :], axis=0).reshape(x.shape) / m


@njit(cache=True)
def _marr_mse(s_hat, m, i_max):
    # s_hat[j] = S_hat(j/m) for j = 0..m
    out = np.empty(i_max + 1)
    for i in range(i_max + 1):
        c = (m - i) / m
        denom = (m - i) * (m - i)
        acc = 0.0
        for j in range(i, m + 1):
            d = j - i
            s_null = 1.0 - d * d / denom
            r = s_hat[j] - c * s_null
            acc += r * r
        out[i] = acc / (m - i)
    return out


def marr(data: PairedPValueSet, alpha: float) -> BaselineResult:
    """Maximum-rank reproducibility procedure."""
    _check_alpha(alpha)
    m = data.m
    if m < 2:
        raise ValueError("marr needs at least two features")
    M = np.maximum(ranks(data.p1), ranks(data.p2))
    # count[j] = #{M_i == j}; S_hat(j/m) = #{M_i >= j} / m
    count = np.bincount(M, minlength=m + 1)
    at_least = np.cumsum(count[::-1])[::-1]
    s_hat = at_least / m
    i_max = int(math.floor(0.9 * m))
    mse = _marr_mse(s_hat.astype(float), m, i_max)
    k_hat = int(np.argmin(mse))
    Q = np.cumsum(count)
    i = np.arange(k_hat + 1, m + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fdr = (i - k_hat) ** 2 / (Q[i] * float(m - k_hat))
    ok = np.isfinite(fdr) & (fdr <= alpha)
    n_hat = int(i[ok][-1]) if ok.any() else 0
    return BaselineResult(
        MARR, M <= n_hat, {"k_hat": k_hat, "pi1_hat": k_hat / m, "n_hat": n_hat}
    )


def radjust_adaptive(data: PairedPValueSet, alpha: float) -> BaselineResult:
    """Adaptive cross-screening procedure with selection at ``alpha``."""
    _check_alpha(alpha)
    p1, p2 = data.p1, data.p2
    s1 = p1 <= alpha
    s2 = p2 <= alpha
    n1, n2 = int(s1.sum()), int(s2.sum())
    reject = np.zeros(data.m, dtype=bool)
    if n1 == 0 or n2 == 0:
        return BaselineResult(RADJUST, reject, {"n_selected1": n1, "n_selected2": n2, "R": 0})
    pi0_1 = (1.0 + np.count_nonzero(s2 & (p1 > alpha))) / (n2 * (1.0 - alpha))
    pi0_2 = (1.0 + np.count_nonzero(s1 & (p2 > alpha))) / (n1 * (1.0 - alpha))
    c1 = alpha / (2.0 * n2 * pi0_1)
    c2 = alpha / (2.0 * n1 * pi0_2)
    both = np.flatnonzero(s1 & s2)
    aux = {"n_selected1": n1, "n_selected2": n2, "pi0_1": pi0_1, "pi0_2": pi0_2}
    if both.size == 0:
        return BaselineResult(RADJUST, reject, {**aux, "R": 0})
    q1, q2 = p1[both], p2[both]
    # smallest integer r at which each candidate passes both thresholds
    need = np.maximum(np.ceil(q1 / c1), np.ceil(q2 / c2)).astype(np.int64)
    need = np.maximum(need, 1)
    need -= (q1 <= (need - 1) * c1) & (q2 <= (need - 1) * c2) & (need > 1)
    need += ~((q1 <= need * c1) & (q2 <= need * c2))
    n_cand = both.size
    counts = np.cumsum(np.bincount(np.minimum(need, n_cand + 1), minlength=n_cand + 2))
    r = np.arange(n_cand + 1)
    fixed = r[counts[: n_cand + 1] == r]
    R = int(fixed[-1])
    if R > 0:
        reject[both[(q1 <= R * c1) & (q2 <= R * c2)]] = True
    return BaselineResult(RADJUST, reject, {**aux, "R": R})


def run_baseline(method: str, data: PairedPValueSet, alpha: float, lambdas=(0.5, 0.5, 0.5)) -> BaselineResult:
    if method == ADHOC_BH:
        return adhoc_bh(data, alpha)
    if method == MAXP:
        return maxp(data, alpha)
    if method == JUMP:
        return jump(data, alpha, lambdas)
    if method == MARR:
        return marr(data, alpha)
    if method == RADJUST:
        return radjust_adaptive(data, alpha)
    raise ValueError(f"unknown method {method!r}")
