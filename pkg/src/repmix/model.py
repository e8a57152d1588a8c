"""Four-state mixture model for paired p-values.

Each feature carries a pair of hidden indicators (theta1, theta2), one per
study.  Conditional on the indicators the two p-values are independent; a
null p-value is uniform on (0, 1) and a signal p-value in study ``j`` follows
a non-increasing density ``f_j``.  The joint prior over the four states is
``xi = (xi00, xi01, xi10, xi11)`` where the first digit refers to study 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import DegenerateModelError, DomainError

P_MIN = 1e-15
P_MAX = 1.0 - 1e-15
DENSITY_FLOOR = 1e-10
SIMPLEX_ATOL = 1e-12
NORMALIZATION_ATOL = 1e-9

STATES = ("00", "01", "10", "11")


def clamp_pvalues(p):
    """Clamp p-values into ``[P_MIN, P_MAX]``.

    Values outside [0, 1] or NaN raise :class:`DomainError`; clamping is only
    meant for exact 0/1 and floating point dust at the boundaries.
    """
    p = np.asarray(p, dtype=float)
    bad = ~((p >= 0.0) & (p <= 1.0))
    if bad.any():
        idx = np.flatnonzero(bad)[:10].tolist()
        raise DomainError(f"p-values outside [0, 1] at positions {idx}")
    return np.clip(p, P_MIN, P_MAX)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PairedPValueSet:
    """Paired p-values from two studies, one row per feature.

    p-values are clamped into ``[1e-15, 1 - 1e-15]`` on construction.
    ``feature_ids`` defaults to ``0..m-1``.
    """

    p1: np.ndarray
    p2: np.ndarray
    feature_ids: Sequence = None

    def __post_init__(self):
        p1 = np.asarray(self.p1, dtype=float).ravel()
        p2 = np.asarray(self.p2, dtype=float).ravel()
        if p1.size != p2.size:
            raise ValueError(f"p1 has {p1.size} values but p2 has {p2.size}")
        if p1.size < 1:
            raise ValueError("need at least one feature")
        ids = self.feature_ids
        if ids is None:
            ids = np.arange(p1.size)
        elif len(ids) != p1.size:
            raise ValueError(f"{len(ids)} feature ids for {p1.size} p-values")
        object.__setattr__(self, "p1", _frozen(clamp_pvalues(p1)))
        object.__setattr__(self, "p2", _frozen(clamp_pvalues(p2)))
        object.__setattr__(self, "feature_ids", tuple(ids) if not isinstance(ids, np.ndarray) else _frozen(ids, ids.dtype))

    @property
    def m(self) -> int:
        return int(self.p1.size)

    def __len__(self):
        return self.m


@dataclass(frozen=True)
class StateProportions:
    """Joint prior over the hidden states (xi00, xi01, xi10, xi11)."""

    xi00: float
    xi01: float
    xi10: float
    xi11: float

    def __post_init__(self):
        v = self.as_array()
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError(f"state proportions must be non-negative, got {v.tolist()}")
        if abs(v.sum() - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"state proportions sum to {v.sum()!r}, not 1")

    @classmethod
    def from_array(cls, v) -> "StateProportions":
        v = np.asarray(v, dtype=float)
        return cls(*(float(x) for x in v))

    @classmethod
    def normalized(cls, v) -> "StateProportions":
        """Build from a non-negative vector, rescaling it onto the simplex."""
        v = np.asarray(v, dtype=float)
        return cls.from_array(v / v.sum())

    def as_array(self) -> np.ndarray:
        return np.array([self.xi00, self.xi01, self.xi10, self.xi11], dtype=float)

    @property
    def pi0_study1(self) -> float:
        """Null proportion in study 1 (theta1 = 0)."""
        return self.xi00 + self.xi01

    @property
    def pi0_study2(self) -> float:
        return self.xi00 + self.xi10


@dataclass(frozen=True)
class MonotoneStepDensity:
    """Non-increasing, left-continuous step density on (0, 1).

    The density equals ``heights[k]`` on ``(knots[k-1], knots[k]]`` with
    ``knots[-1] = 0`` and is zero on ``(knots[-1], 1)``.
    """

    knots: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).ravel()
        heights = np.asarray(self.heights, dtype=float).ravel()
        if knots.size == 0 or knots.size != heights.size:
            raise ValueError("knots and heights must be non-empty and of equal length")
        if knots[0] <= 0.0 or knots[-1] > 1.0 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing inside (0, 1]")
        if np.any(heights < 0) or np.any(np.diff(heights) > 0):
            raise ValueError("heights must be non-negative and non-increasing")
        mass = float(np.dot(heights, np.diff(knots, prepend=0.0)))
        if abs(mass - 1.0) > NORMALIZATION_ATOL:
            raise ValueError(f"density integrates to {mass!r}, not 1")
        object.__setattr__(self, "knots", _frozen(knots))
        object.__setattr__(self, "heights", _frozen(heights))

    @classmethod
    def uniform(cls) -> "MonotoneStepDensity":
        return cls(np.array([1.0]), np.array([1.0]))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(~((x > 0.0) & (x < 1.0))):
            raise DomainError("density evaluated outside (0, 1)")
        idx = np.searchsorted(self.knots, x, side="left")
        padded = np.append(self.heights, 0.0)
        out = padded[idx]
        return out if out.ndim else float(out)

    @property
    def n_knots(self) -> int:
        return int(self.knots.size)

    def integral(self) -> float:
        return float(np.dot(self.heights, np.diff(self.knots, prepend=0.0)))


Density = Union[MonotoneStepDensity, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class MixtureModel:
    """Mixture of the four joint states; the null density is uniform.

    ``f1`` and ``f2`` are usually :class:`MonotoneStepDensity` objects but any
    vectorized callable non-increasing density on (0, 1) is accepted (the
    simulation module uses this for the true model).
    """

    proportions: StateProportions
    f1: Density = field(default_factory=MonotoneStepDensity.uniform)
    f2: Density = field(default_factory=MonotoneStepDensity.uniform)


@dataclass(frozen=True)
class HiddenStates:
    theta1: np.ndarray
    theta2: np.ndarray

    def __post_init__(self):
        t1 = np.asarray(self.theta1).astype(bool).ravel()
        t2 = np.asarray(self.theta2).astype(bool).ravel()
        if t1.size != t2.size:
            raise ValueError("theta1 and theta2 differ in length")
        object.__setattr__(self, "theta1", _frozen(t1, bool))
        object.__setattr__(self, "theta2", _frozen(t2, bool))

    @property
    def replicable(self) -> np.ndarray:
        """True where the feature is a signal in both studies."""
        return self.theta1 & self.theta2

    @property
    def m(self) -> int:
        return int(self.theta1.size)


def _check_open_unit(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~((x > 0.0) & (x < 1.0))):
        raise DomainError(f"{name} must lie strictly inside (0, 1)")
    return x


def _state_terms(model: MixtureModel, x, y, floor: bool):
    x = _check_open_unit(x, "x")
    y = _check_open_unit(y, "y")
    f1 = np.asarray(model.f1(x), dtype=float)
    f2 = np.asarray(model.f2(y), dtype=float)
    if floor:
        f1 = np.maximum(f1, DENSITY_FLOOR)
        f2 = np.maximum(f2, DENSITY_FLOOR)
    xi = model.proportions
    return (
        np.broadcast_to(xi.xi00, np.broadcast(f1, f2).shape),
        xi.xi01 * f2,
        xi.xi10 * f1,
        xi.xi11 * f1 * f2,
    )


def mixture_density(model: MixtureModel, x, y):
    """Joint density of the p-value pair, xi00 + xi10 f1 + xi01 f2 + xi11 f1 f2."""
    a00, a01, a10, a11 = _state_terms(model, x, y, floor=False)
    out = a00 + a01 + a10 + a11
    return out if out.ndim else float(out)


def lfdr(model: MixtureModel, x, y):
    """Posterior probability that a feature is not a signal in both studies.

    Signal densities are floored at ``DENSITY_FLOOR`` before the ratio is
    formed, so the result is always defined when any state has positive
    weight.
    """
    a00, a01, a10, a11 = _state_terms(model, x, y, floor=True)
    num = a00 + a01 + a10
    den = num + a11
    if np.any(~np.isfinite(den)) or np.any(den <= 0.0):
        raise DegenerateModelError("mixture density vanishes; Lfdr undefined")
    out = np.clip(num / den, 0.0, 1.0)
    return out if out.ndim else float(out)
