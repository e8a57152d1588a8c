import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repmix.exceptions import DegenerateModelError, DomainError
from repmix.model import (
    P_MAX,
    P_MIN,
    HiddenStates,
    MixtureModel,
    MonotoneStepDensity,
    PairedPValueSet,
    StateProportions,
    lfdr,
    mixture_density,
)


def linear(x):
    """The density 2 - 2x, non-increasing on (0, 1)."""
    return 2.0 - 2.0 * np.asarray(x, dtype=float)


def quarter():
    return StateProportions(0.25, 0.25, 0.25, 0.25)


def random_density(rng, n_knots):
    knots = np.sort(rng.choice(np.arange(1, 200), n_knots, replace=False)) / 200.0
    heights = np.sort(rng.exponential(size=n_knots))[::-1]
    mass = np.dot(heights, np.diff(knots, prepend=0.0))
    return MonotoneStepDensity(knots, heights / mass)


def random_model(rng):
    xi = StateProportions.normalized(rng.dirichlet(np.ones(4)))
    return MixtureModel(xi, random_density(rng, rng.integers(1, 8)), random_density(rng, rng.integers(1, 8)))


class TestPairedPValueSet:
    def test_clamps_exact_boundaries(self):
        d = PairedPValueSet([0.0, 0.5], [1.0, 0.2])
        assert d.p1[0] == P_MIN
        assert d.p2[0] == P_MAX
        assert d.m == 2

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            PairedPValueSet([1.5], [0.5])
        with pytest.raises(DomainError):
            PairedPValueSet([np.nan], [0.5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            PairedPValueSet([0.1, 0.2], [0.3])

    def test_default_ids_and_immutability(self):
        d = PairedPValueSet([0.1, 0.2], [0.3, 0.4])
        np.testing.assert_array_equal(d.feature_ids, [0, 1])
        with pytest.raises(ValueError):
            d.p1[0] = 0.9


class TestStateProportions:
    def test_simplex(self):
        with pytest.raises(ValueError):
            StateProportions(0.5, 0.5, 0.5, 0.0)
        with pytest.raises(ValueError):
            StateProportions(1.1, -0.1, 0.0, 0.0)

    def test_marginal_nulls(self):
        xi = StateProportions(0.7, 0.1, 0.15, 0.05)
        assert xi.pi0_study1 == pytest.approx(0.8)
        assert xi.pi0_study2 == pytest.approx(0.85)


class TestMonotoneStepDensity:
    def test_left_continuous_evaluation(self):
        f = MonotoneStepDensity([0.2, 0.6], [2.5, 1.25])
        np.testing.assert_allclose(f([0.1, 0.2, 0.2000001, 0.6, 0.7]), [2.5, 2.5, 1.25, 1.25, 0.0])

    def test_invariants_checked(self):
        with pytest.raises(ValueError):
            MonotoneStepDensity([0.5, 1.0], [1.0, 1.5])
        with pytest.raises(ValueError):
            MonotoneStepDensity([0.5], [1.0])
        with pytest.raises(ValueError):
            MonotoneStepDensity([0.5, 0.5], [1.0, 1.0])

    def test_domain(self):
        f = MonotoneStepDensity.uniform()
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(DomainError):
                f(bad)


class TestMixtureDensity:
    def test_uniform_densities_collapse(self):
        model = MixtureModel(StateProportions(0.6, 0.1, 0.2, 0.1))
        assert mixture_density(model, 0.3, 0.3) == pytest.approx(1.0)

    def test_linear_densities_near_origin(self):
        model = MixtureModel(quarter(), linear, linear)
        assert mixture_density(model, 1e-13, 1e-13) == pytest.approx(2.25, abs=1e-9)

    def test_pure_null(self):
        model = MixtureModel(StateProportions(1, 0, 0, 0), linear, linear)
        np.testing.assert_allclose(mixture_density(model, [0.1, 0.9], [0.5, 0.01]), 1.0)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            mixture_density(MixtureModel(quarter()), 0.0, 0.5)

    def test_normalization(self):
        rng = np.random.default_rng(3)
        model = random_model(rng)
        n = 2000
        g = (np.arange(n) + 0.5) / n
        total = mixture_density(model, g[:, None], g[None, :]).mean()
        assert total == pytest.approx(1.0, abs=1e-3)


class TestLfdr:
    def test_no_null_mass(self):
        model = MixtureModel(StateProportions(0, 0, 0, 1), linear, linear)
        np.testing.assert_allclose(lfdr(model, [0.1, 0.5], [0.3, 0.9]), 0.0, atol=1e-15)

    def test_no_signal_mass(self):
        model = MixtureModel(StateProportions(1, 0, 0, 0), linear, linear)
        np.testing.assert_allclose(lfdr(model, [0.1, 0.5], [0.3, 0.9]), 1.0)

    def test_linear_near_origin(self):
        model = MixtureModel(quarter(), linear, linear)
        assert lfdr(model, 1e-13, 1e-13) == pytest.approx(5.0 / 9.0, abs=1e-9)

    def test_matches_posterior(self):
        model = MixtureModel(quarter(), linear, linear)
        x, y = 0.2, 0.4
        p11 = 0.25 * linear(x) * linear(y) / mixture_density(model, x, y)
        assert lfdr(model, x, y) == pytest.approx(1.0 - p11)

    def test_floor_keeps_ratio_defined(self):
        # beyond the last knot both signal densities vanish
        f = MonotoneStepDensity([0.5], [2.0])
        model = MixtureModel(StateProportions(0, 0.5, 0.5, 0), f, f)
        assert lfdr(model, 0.9, 0.9) == 1.0

    def test_degenerate(self):
        f = MonotoneStepDensity([0.5], [2.0])
        blowup = lambda x: np.full_like(x, np.inf)  # noqa: E731
        with pytest.raises(DegenerateModelError), np.errstate(invalid="ignore"):
            lfdr(MixtureModel(StateProportions(0, 0, 0, 1), blowup, f), 0.1, 0.1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_monotone_and_bounded(self, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng)
        x = np.sort(rng.uniform(1e-6, 1 - 1e-6, (2, 200)), axis=0)
        y = np.sort(rng.uniform(1e-6, 1 - 1e-6, (2, 200)), axis=0)
        lo = lfdr(model, x[0], y[0])
        hi = lfdr(model, x[1], y[1])
        assert np.all(lo <= hi + 1e-12)
        assert np.all((lo >= 0) & (hi <= 1))


class TestHiddenStates:
    def test_replicable(self):
        h = HiddenStates([1, 1, 0, 0], [1, 0, 1, 0])
        np.testing.assert_array_equal(h.replicable, [True, False, False, False])
