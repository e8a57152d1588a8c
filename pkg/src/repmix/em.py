"""EM fit of the four-state mixture with non-parametric signal densities.

Two modes are supported:

``full-em``
    Alternate E-steps with closed-form updates of the state proportions and
    weighted Grenander updates of both signal densities.
``conservative-xi``
    Fix the state proportions at the Storey-type moment estimates and
    iterate only the density updates.  Posteriors are recomputed with the
    fixed proportions at every iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .exceptions import ConfigError, DegenerateModelError, DegenerateSampleError
from .grenander import SortedColumn, WeightedSample, weighted_monotone_mle
from .model import (
    DENSITY_FLOOR,
    MixtureModel,
    MonotoneStepDensity,
    PairedPValueSet,
    StateProportions,
)

log = logging.getLogger(__name__)

FULL_EM = "full-em"
CONSERVATIVE_XI = "conservative-xi"
MODES = (FULL_EM, CONSERVATIVE_XI)

INITIAL_XI = (0.85, 0.05, 0.05, 0.05)
SIMPLEX_CLIP = 1e-6

Lambda = Union[float, str]


@dataclass(frozen=True)
class PosteriorTable:
    """Per-feature posterior state probabilities, columns (00, 01, 10, 11)."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2 or g.shape[1] != 4:
            raise ValueError("posterior table must have shape (m, 4)")
        if np.any(g < -1e-12) or np.any(np.abs(g.sum(axis=1) - 1.0) > 1e-10):
            raise ValueError("posterior rows must be probability vectors")
        object.__setattr__(self, "gamma", g)

    gamma00 = property(lambda self: self.gamma[:, 0])
    gamma01 = property(lambda self: self.gamma[:, 1])
    gamma10 = property(lambda self: self.gamma[:, 2])
    gamma11 = property(lambda self: self.gamma[:, 3])

    @property
    def signal_weights_study1(self) -> np.ndarray:
        return self.gamma[:, 2] + self.gamma[:, 3]

    @property
    def signal_weights_study2(self) -> np.ndarray:
        return self.gamma[:, 1] + self.gamma[:, 3]


@dataclass(frozen=True)
class FitConfig:
    """Options for :func:`fit`.

    ``lambda1``/``lambda2`` tune the per-study null proportion estimates and
    ``lambda3`` the joint-null estimate; each is a float in (0, 1) or
    ``"auto"``.  They are only used in conservative-xi mode.
    """

    mode: str = CONSERVATIVE_XI
    max_iterations: int = 500
    tolerance: float = 1e-6
    lambda1: Lambda = 0.5
    lambda2: Lambda = 0.5
    lambda3: Lambda = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.max_iterations) < 1:
            raise ConfigError("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        for name in ("lambda1", "lambda2", "lambda3"):
            lam = getattr(self, name)
            if lam == "auto":
                continue
            if isinstance(lam, str) or not 0.0 < float(lam) < 1.0:
                raise ConfigError(f"{name} must be in (0, 1) or 'auto', got {lam!r}")


@dataclass(frozen=True)
class FitResult:
    model: MixtureModel
    log_likelihood_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    mode: str = FULL_EM

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]


def _floored(f, x):
    return np.maximum(np.asarray(f(x), dtype=float), DENSITY_FLOOR)


def _posterior_from_values(xi: StateProportions, f1v, f2v):
    terms = np.column_stack(
        (
            np.full(f1v.shape, xi.xi00),
            xi.xi01 * f2v,
            xi.xi10 * f1v,
            xi.xi11 * f1v * f2v,
        )
    )
    den = terms.sum(axis=1)
    if np.any(~np.isfinite(den)) or np.any(den <= 0.0):
        raise DegenerateModelError("zero mixture density at an observed pair")
    return terms / den[:, None], float(np.mean(np.log(den)))


def e_step(model: MixtureModel, data: PairedPValueSet) -> PosteriorTable:
    """Posterior probabilities of the four hidden states for every feature."""
    gamma, _ = _posterior_from_values(
        model.proportions, _floored(model.f1, data.p1), _floored(model.f2, data.p2)
    )
    return PosteriorTable(gamma)


def mean_log_likelihood(model: MixtureModel, data: PairedPValueSet) -> float:
    """Observed-data mean log-likelihood, signal densities floored."""
    _, ll = _posterior_from_values(
        model.proportions, _floored(model.f1, data.p1), _floored(model.f2, data.p2)
    )
    return ll


def m_step_proportions(post: PosteriorTable) -> StateProportions:
    return StateProportions.normalized(post.gamma.mean(axis=0))


def m_step_density(data_column, post: PosteriorTable, which: str) -> MonotoneStepDensity:
    """Weighted Grenander update for ``f1`` (weights g10+g11) or ``f2`` (g01+g11)."""
    if which == "f1":
        w = post.signal_weights_study1
    elif which == "f2":
        w = post.signal_weights_study2
    else:
        raise ValueError(f"which must be 'f1' or 'f2', got {which!r}")
    return weighted_monotone_mle(WeightedSample(data_column, w))


def conservative_proportions(data: PairedPValueSet, lambda1=0.5, lambda2=0.5, lambda3=0.5) -> StateProportions:
    """Moment estimates of the state proportions, clipped onto the simplex.

    Each component is floored at ``1e-6`` and the vector renormalized.
    """
    from .baselines import storey_xi

    raw = storey_xi(data, lambda1, lambda2, lambda3)
    xi = np.maximum(raw, SIMPLEX_CLIP)
    xi = xi / xi.sum()
    if not xi[3] > 0.0:
        raise DegenerateModelError("estimated replicable-signal proportion is not positive")
    if np.any(raw < SIMPLEX_CLIP):
        log.debug("clipped moment estimates %s onto the simplex", raw)
    return StateProportions.from_array(xi)


def initial_model(data: PairedPValueSet, cols=None) -> MixtureModel:
    """Starting point: fixed proportions and unweighted marginal Grenander fits."""
    if cols is None:
        cols = (SortedColumn(data.p1), SortedColumn(data.p2))
    ones = np.ones(data.m)
    f1, _ = cols[0].fit(ones)
    f2, _ = cols[1].fit(ones)
    return MixtureModel(StateProportions(*INITIAL_XI), f1, f2)


def _converged(prev, cur, tol):
    return abs(cur - prev) <= tol * max(abs(prev), 1.0)


def fit(data: PairedPValueSet, config: FitConfig = None) -> FitResult:
    """Fit the mixture by EM.

    Each iteration is one E-step followed by the M-step(s); the trace holds
    the mean log-likelihood of the initial model followed by that of every
    updated model.  Iteration stops when the change relative to
    ``max(|previous|, 1)`` drops below ``config.tolerance``.
    """
    config = config or FitConfig()
    if data.m < 2:
        raise DegenerateSampleError("need at least two features to fit the mixture")
    cols = (SortedColumn(data.p1), SortedColumn(data.p2))
    model = initial_model(data, cols)
    xi = model.proportions
    if config.mode == CONSERVATIVE_XI:
        xi = conservative_proportions(data, config.lambda1, config.lambda2, config.lambda3)
        model = MixtureModel(xi, model.f1, model.f2)

    f1v = np.maximum(model.f1(data.p1), DENSITY_FLOOR)
    f2v = np.maximum(model.f2(data.p2), DENSITY_FLOOR)
    gamma, ll = _posterior_from_values(xi, f1v, f2v)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, int(config.max_iterations) + 1):
        if config.mode == FULL_EM:
            xi = StateProportions.normalized(gamma.mean(axis=0))
        f1, f1_at = cols[0].fit(gamma[:, 2] + gamma[:, 3])
        f2, f2_at = cols[1].fit(gamma[:, 1] + gamma[:, 3])
        model = MixtureModel(xi, f1, f2)
        gamma, ll = _posterior_from_values(
            xi, np.maximum(f1_at, DENSITY_FLOOR), np.maximum(f2_at, DENSITY_FLOOR)
        )
        trace.append(ll)
        if _converged(trace[-2], ll, config.tolerance):
            converged = True
            break
    if not converged:
        log.info("EM stopped after %d iterations without converging", it)
    return FitResult(model, trace, it, converged, config.mode)
