"""Simulation designs, evaluation metrics and the Hellinger diagnostic.

Test statistics are normal: a signal in study ``j`` has mean ``mu_j`` and a
null has mean 0, both with standard deviation ``sigma_j``; p-values are the
one-sided upper tail ``1 - Phi(X / sigma_j)``.  In block mode each study's
features are split into blocks that are independent of each other; inside a
block the noise is equicorrelated with ``+rho`` within each of two equal
sub-blocks and ``-rho`` across them.

Random streams
--------------
Every draw comes from a Philox counter-based generator keyed by
``SeedSequence(seed, spawn_key=key)``:

* ``key = (rep, 0)`` -- hidden states of replicate ``rep``;
* ``key = (rep, j)`` -- noise of study ``j`` in independent mode;
* ``key = (rep, j, b)`` -- noise of block ``b`` of study ``j`` in block mode.

A replicate is therefore reproducible on its own, whatever the scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import norm

from . import baselines
from .em import FitConfig, fit
from .fdrctl import step_up
from .model import (
    HiddenStates,
    MixtureModel,
    PairedPValueSet,
    StateProportions,
    lfdr,
)

INDEPENDENT = "independent"
BLOCK = "block"

PROPOSED = "proposed"
ORACLE = "oracle"
PROCEDURES = (PROPOSED,) + baselines.METHODS + (ORACLE,)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


class ShiftedNormalDensity:
    """Density of the one-sided p-value of an N(delta, 1) statistic.

    ``f(p) = exp(delta z - delta^2 / 2)`` with ``z = Phi^{-1}(1 - p)``;
    non-increasing in ``p`` for ``delta >= 0``.
    """

    def __init__(self, delta: float):
        self.delta = float(delta)

    def __call__(self, p):
        z = -ndtri(np.asarray(p, dtype=float))
        return np.exp(self.delta * z - 0.5 * self.delta ** 2)

    def __repr__(self):
        return f"ShiftedNormalDensity(delta={self.delta!r})"


def block_covariance(block_size: int, rho: float) -> np.ndarray:
    """+rho within each half of the block, -rho across halves, unit diagonal."""
    half = block_size // 2
    sign = np.r_[np.ones(half), -np.ones(block_size - half)]
    cov = rho * np.outer(sign, sign)
    np.fill_diagonal(cov, 1.0)
    return cov


@dataclass(frozen=True)
class SimConfig:
    m: int = 10_000
    proportions: StateProportions = field(
        default_factory=lambda: StateProportions(0.8, 0.095, 0.095, 0.01)
    )
    mu1: float = 2.5
    mu2: float = 2.5
    sigma1: float = 1.0
    sigma2: float = 1.0
    dependence: str = INDEPENDENT
    block_size: int = 100
    rho: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("standard deviations must be positive")
        if self.dependence not in (INDEPENDENT, BLOCK):
            raise ValueError(f"unknown dependence {self.dependence!r}")
        if self.dependence == BLOCK:
            if self.block_size < 2 or self.m % self.block_size:
                raise ValueError("block_size must be at least 2 and divide m")
            if not -1.0 < self.rho < 1.0:
                raise ValueError("rho must lie in (-1, 1)")
            if np.linalg.eigvalsh(block_covariance(self.block_size, self.rho))[0] <= 0:
                raise ValueError(
                    f"block covariance with rho={self.rho} and size {self.block_size} "
                    "is not positive definite"
                )

    def with_seed(self, seed: int) -> "SimConfig":
        return SimConfig(**{**self._fields(), "seed": seed})

    def _fields(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def describe(self) -> dict:
        d = self._fields()
        d.update(asdict(self.proportions))
        del d["proportions"]
        return d


def paper_grid(mu=2.5, xi00_values=(0.55, 0.65, 0.8, 0.85), xi11=0.01, **kw):
    """Settings with xi01 = xi10 = (1 - xi00 - xi11) / 2."""
    out = []
    for x00 in xi00_values:
        side = (1.0 - x00 - xi11) / 2.0
        props = StateProportions.normalized([x00, side, side, xi11])
        out.append(SimConfig(proportions=props, mu1=mu, mu2=mu, **kw))
    return out


@dataclass(frozen=True)
class SimulatedDataset:
    data: PairedPValueSet
    truth: HiddenStates
    config: SimConfig
    replicate: int = 0


@dataclass(frozen=True)
class EvalMetrics:
    fdp: float
    power: float
    rejections: int

    @property
    def false_rejections(self) -> int:
        return int(round(self.fdp * self.rejections))


def true_model(config: SimConfig) -> MixtureModel:
    return MixtureModel(
        config.proportions,
        ShiftedNormalDensity(config.mu1 / config.sigma1),
        ShiftedNormalDensity(config.mu2 / config.sigma2),
    )


def _draw_states(config, rep):
    g = rng_for(config.seed, rep, 0)
    state = g.choice(4, size=config.m, p=config.proportions.as_array())
    return (state >= 2), (state % 2 == 1)


def _noise(config, rep, study):
    m = config.m
    if config.dependence == INDEPENDENT:
        return rng_for(config.seed, rep, study).standard_normal(m)
    chol = np.linalg.cholesky(block_covariance(config.block_size, config.rho))
    n_blocks = m // config.block_size
    z = np.empty((n_blocks, config.block_size))
    for b in range(n_blocks):
        z[b] = rng_for(config.seed, rep, study, b).standard_normal(config.block_size)
    return (z @ chol.T).ravel()


def generate(config: SimConfig, replicate: int = 0) -> SimulatedDataset:
    """Draw one dataset; ``replicate`` selects the random streams."""
    theta1, theta2 = _draw_states(config, replicate)
    x1 = theta1 * config.mu1 + config.sigma1 * _noise(config, replicate, 1)
    x2 = theta2 * config.mu2 + config.sigma2 * _noise(config, replicate, 2)
    p1 = norm.sf(x1 / config.sigma1)
    p2 = norm.sf(x2 / config.sigma2)
    return SimulatedDataset(
        PairedPValueSet(p1, p2), HiddenStates(theta1, theta2), config, replicate
    )


def evaluate(result_flags, truth: HiddenStates) -> EvalMetrics:
    flags = np.asarray(result_flags, dtype=bool)
    signal = truth.replicable
    r = int(flags.sum())
    false = int(np.count_nonzero(flags & ~signal))
    n_signal = int(signal.sum())
    fdp = false / r if r else 0.0
    power = int(np.count_nonzero(flags & signal)) / n_signal if n_signal else 0.0
    return EvalMetrics(fdp, power, r)


def run_procedure(name, sim: SimulatedDataset, alpha, fit_config=None, lambdas=(0.5, 0.5, 0.5)):
    """Rejection flags of procedure ``name`` on a simulated dataset."""
    if name == PROPOSED:
        model = fit(sim.data, fit_config).model
        return step_up(lfdr(model, sim.data.p1, sim.data.p2), alpha).reject
    if name == ORACLE:
        model = true_model(sim.config)
        return step_up(lfdr(model, sim.data.p1, sim.data.p2), alpha).reject
    return baselines.run_baseline(name, sim.data, alpha, lambdas).reject


@dataclass
class ExperimentResult:
    """Per-replicate metrics; arrays are indexed ``[replicate]``."""

    config: SimConfig
    alpha: float
    procedures: tuple
    fdp: dict
    power: dict
    rejections: dict

    @property
    def n_reps(self) -> int:
        return len(next(iter(self.fdp.values())))

    def mean_se(self, metric: str, procedure: str):
        x = getattr(self, metric)[procedure]
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0

    def paired_diff(self, metric: str, a: str, b: str):
        """Mean and Monte Carlo standard error of ``a - b`` over replicates."""
        d = getattr(self, metric)[a] - getattr(self, metric)[b]
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0

    def table(self) -> list:
        rows = []
        setting = self.config.describe()
        for proc in self.procedures:
            fdr, fdr_se = self.mean_se("fdp", proc)
            pw, pw_se = self.mean_se("power", proc)
            rows.append(
                {
                    "procedure": proc,
                    **setting,
                    "alpha": self.alpha,
                    "n_reps": self.n_reps,
                    "fdr": fdr,
                    "fdr_se": fdr_se,
                    "power": pw,
                    "power_se": pw_se,
                    "mean_rejections": float(np.mean(self.rejections[proc])),
                }
            )
        return rows


def _one_replicate(args):
    config, rep, procedures, alpha, fit_config = args
    sim = generate(config, rep)
    out = []
    for proc in procedures:
        met = evaluate(run_procedure(proc, sim, alpha, fit_config), sim.truth)
        out.append((met.fdp, met.power, met.rejections))
    return out


def replicate_experiment(config: SimConfig, procedures, alpha=0.05, n_reps=100,
                         fit_config=None, n_jobs=1) -> ExperimentResult:
    """Run ``n_reps`` replicates (streams 0..n_reps-1) of every procedure."""
    procedures = tuple(procedures)
    unknown = set(procedures) - set(PROCEDURES)
    if unknown:
        raise ValueError(f"unknown procedures {sorted(unknown)}")
    jobs = [(config, rep, procedures, alpha, fit_config) for rep in range(n_reps)]
    if n_jobs == 1:
        results = [_one_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_one_replicate, jobs))
    arr = np.array(results, dtype=float)  # (rep, procedure, metric)
    pick = lambda k: {p: arr[:, i, k] for i, p in enumerate(procedures)}
    return ExperimentResult(config, alpha, procedures, pick(0), pick(1), pick(2))


def hellinger(model_a: MixtureModel, model_b: MixtureModel, grid: int = 1000) -> float:
    """Two-dimensional Hellinger distance by the midpoint rule on a grid x grid mesh."""
    x = (np.arange(grid) + 0.5) / grid

    def density(model):
        xi = model.proportions
        f1 = np.asarray(model.f1(x), dtype=float)
        f2 = np.asarray(model.f2(x), dtype=float)
        return (xi.xi00 + xi.xi10 * f1[:, None] + xi.xi01 * f2[None, :]
                + xi.xi11 * np.outer(f1, f2))

    diff = np.sqrt(density(model_a)) - np.sqrt(density(model_b))
    h2 = 0.5 * float(np.mean(diff * diff))
    return float(min(math.sqrt(h2), 1.0))


__all__ = [
    "SimConfig", "SimulatedDataset", "EvalMetrics", "ExperimentResult",
    "ShiftedNormalDensity", "generate", "evaluate", "replicate_experiment",
    "hellinger", "true_model", "paper_grid", "run_procedure", "block_covariance",
    "PROCEDURES", "PROPOSED", "ORACLE", "INDEPENDENT", "BLOCK", "rng_for",
]
