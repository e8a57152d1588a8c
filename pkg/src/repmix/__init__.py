"""Replicability analysis of paired p-values with a four-state mixture.

Two studies report p-values for the same features.  Each feature is null or
signal in each study; the replicable signals are those that are signals in
both.  The joint p-value density is a mixture of uniform nulls and two
non-increasing signal densities, fitted by EM with weighted Grenander
updates, and the resulting local false discovery rates feed a step-up rule.
"""

from .em import CONSERVATIVE_XI, FULL_EM, FitConfig, FitResult, PosteriorTable, fit
from .exceptions import (
    ConfigError,
    DegenerateModelError,
    DegenerateSampleError,
    DomainError,
    ParseError,
    RepmixError,
)
from .fdrctl import RejectionResult, critical_value, estimated_fdp_at, step_up
from .grenander import WeightedSample, pava_isotonic, weighted_monotone_mle
from .model import (
    HiddenStates,
    MixtureModel,
    MonotoneStepDensity,
    PairedPValueSet,
    StateProportions,
    lfdr,
    mixture_density,
)

__version__ = "0.1.0"

__all__ = [
    "CONSERVATIVE_XI", "FULL_EM", "FitConfig", "FitResult", "PosteriorTable", "fit",
    "ConfigError", "DegenerateModelError", "DegenerateSampleError", "DomainError",
    "ParseError", "RepmixError", "RejectionResult", "critical_value",
    "estimated_fdp_at", "step_up", "WeightedSample", "pava_isotonic",
    "weighted_monotone_mle", "HiddenStates", "MixtureModel", "MonotoneStepDensity",
    "PairedPValueSet", "StateProportions", "lfdr", "mixture_density",
]
