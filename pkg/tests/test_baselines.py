import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repmix import baselines as bl
from repmix.model import PairedPValueSet


def paired(p1, p2):
    return PairedPValueSet(np.asarray(p1, float), np.asarray(p2, float))


def signal_data(rng, m=2000, pi1=0.2, strength=0.3):
    n1 = int(pi1 * m)
    p1 = rng.random(m)
    p2 = rng.random(m)
    p1[:n1] *= strength * 1e-3
    p2[:n1] *= strength * 1e-3
    return paired(p1, p2)


class TestBH:
    def test_worked_example(self):
        np.testing.assert_array_equal(bl.bh([0.01, 0.02, 0.04, 0.9], 0.05), [True, True, False, False])

    def test_all_ones(self):
        assert not bl.bh(np.ones(10), 0.05).any()

    def test_boundary_equality(self):
        assert bl.bh([0.05], 0.05).all()

    def test_empty(self):
        with pytest.raises(ValueError):
            bl.bh([], 0.05)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=40), st.floats(0.01, 0.3))
    def test_prefix_and_padding(self, p, alpha):
        p = np.asarray(p)
        r = bl.bh(p, alpha)
        if r.any() and (~r).any():
            assert p[r].max() <= p[~r].min()
        padded = bl.bh(np.r_[p, 1.0], alpha)
        # an extra p = 1 raises every threshold denominator, so it can only shrink the set
        assert np.all(r[padded[:-1]])


    def test_padding_can_shrink(self):
        assert bl.bh([0.05], 0.05).all()
        assert not bl.bh([0.05, 1.0], 0.05).any()


class TestAdhocAndMaxp:
    def test_intersection(self):
        p1 = [0.001, 0.001, 0.9, 0.9]
        p2 = [0.9, 0.001, 0.001, 0.9]
        res = bl.adhoc_bh(paired(p1, p2), 0.05)
        np.testing.assert_array_equal(res.reject, [False, True, False, False])

    def test_one_study_empty(self):
        res = bl.adhoc_bh(paired([0.001, 0.002], [0.9, 0.8]), 0.05)
        assert not res.reject.any()

    def test_identical_columns(self):
        p = [0.01, 0.02, 0.04, 0.9]
        np.testing.assert_array_equal(bl.adhoc_bh(paired(p, p), 0.05).reject, bl.bh(p, 0.05))

    def test_maxp_equal_columns(self):
        p = [0.001, 0.3, 0.02, 0.5]
        np.testing.assert_array_equal(bl.maxp(paired(p, p), 0.05).reject, bl.bh(p, 0.05))

    def test_maxp_one_never_rejected(self):
        res = bl.maxp(paired([1e-9, 1e-9], [1.0, 1e-9]), 0.05)
        np.testing.assert_array_equal(res.reject, [False, True])

    def test_maxp_worked_example(self):
        res = bl.maxp(paired([0.01, 0.001, 0.04, 0.9], [0.001, 0.02, 0.001, 0.5]), 0.05)
        assert res.n_rejected == 2

    def test_maxp_rejections_below_threshold(self):
        rng = np.random.default_rng(1)
        data = signal_data(rng, 500)
        res = bl.maxp(data, 0.05)
        k = res.n_rejected
        assert np.all(data.p1[res.reject] <= k * 0.05 / data.m)
        assert np.all(data.p2[res.reject] <= k * 0.05 / data.m)


class TestStorey:
    def test_pi0(self):
        assert bl.storey_pi0([0.2, 0.4, 0.6, 0.8], 0.5) == pytest.approx(1.0)

    def test_pi0_all_below(self):
        assert bl.storey_pi0([0.1, 0.2], 0.5) == 0.0

    def test_pi0_uniform(self):
        rng = np.random.default_rng(2)
        m = 200_000
        se = np.sqrt(0.5 * 0.5 / m) / 0.5
        assert abs(bl.storey_pi0(rng.random(m), 0.5) - 1.0) < 3 * se

    def test_joint_counts(self):
        data = paired([0.6, 0.7, 0.8, 0.9], [0.55, 0.65, 0.75, 0.95])
        assert bl.joint_xi00(data, 0.5) == pytest.approx(4.0)

    def test_joint_none(self):
        assert bl.joint_xi00(paired([0.1, 0.9], [0.9, 0.1]), 0.5) == 0.0

    def test_joint_uniform(self):
        rng = np.random.default_rng(3)
        m = 200_000
        data = paired(rng.random(m), rng.random(m))
        se = np.sqrt(0.25 * 0.75 / m) / 0.25
        assert abs(bl.joint_xi00(data, 0.5) - 1.0) < 3 * se

    def test_auto_lambda_in_unit_interval(self):
        rng = np.random.default_rng(4)
        data = signal_data(rng)
        for value in (bl.pi0_estimate(data.p1, "auto"), bl.xi00_estimate(data, "auto")):
            assert 0.0 <= value <= 1.0

    def test_storey_xi_sums_to_one(self):
        rng = np.random.default_rng(5)
        assert bl.storey_xi(signal_data(rng)).sum() == pytest.approx(1.0)


class TestJump:
    def test_worked_example(self):
        t = np.array([0.01, 0.03, 0.2, 0.9])
        est = bl.jump_fdr_hat(t, 0.7, 0.1, 0.1, np.arange(1, 5), 4)
        np.testing.assert_allclose(est, [0.00828, 0.013260, 0.090667, 0.747], rtol=1e-3)
        assert int(np.flatnonzero(est <= 0.05)[-1]) + 1 == 2

    def test_pure_quadratic_null(self):
        t = np.array([0.1, 0.2])
        np.testing.assert_allclose(bl.jump_fdr_hat(t, 1.0, 0, 0, np.array([1, 2]), 10), 10 * t**2 / [1, 2])

    def test_all_max_one(self):
        res = bl.jump(paired(np.full(20, 0.9), np.ones(20)), 0.05)
        assert res.n_rejected == 0

    def test_monotone_in_xi(self):
        t = np.linspace(0.01, 1, 20)
        n = np.arange(1, 21)
        base = bl.jump_fdr_hat(t, 0.5, 0.1, 0.1, n, 100)
        for bumped in ((0.6, 0.1, 0.1), (0.5, 0.2, 0.1), (0.5, 0.1, 0.2)):
            assert np.all(bl.jump_fdr_hat(t, *bumped, n, 100) >= base)

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(6)
        data = signal_data(rng, 1000, strength=50)
        ks = [bl.jump(data, a).auxiliary["k_hat"] for a in (0.01, 0.05, 0.1, 0.2)]
        assert ks == sorted(ks)

    def test_negative_estimates_clipped(self):
        rng = np.random.default_rng(7)
        m = 2000
        data = paired(rng.beta(0.2, 3, m), rng.random(m))
        raw = bl.storey_xi(data)
        aux = bl.jump(data, 0.05).auxiliary
        assert aux["xi01"] == max(raw[1], 0.0)
        assert aux["xi10"] == max(raw[2], 0.0)


class TestMarr:
    def test_null_survival_zero(self):
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(bl.marr_null_survival(x, 0.0), 1 - x**2)

    def test_empirical_survival_small(self):
        np.testing.assert_allclose(bl.marr_empirical_survival([1, 2], [0.5, 1.0]), [1.0, 0.5])

    def test_ranks_stable(self):
        np.testing.assert_array_equal(bl.ranks([0.3, 0.1, 0.3, 0.2]), [3, 1, 4, 2])

    def test_separated_signals(self):
        rng = np.random.default_rng(8)
        est = [bl.marr(signal_data(rng, 2000, pi1=0.2), 0.05).auxiliary["pi1_hat"] for _ in range(15)]
        assert abs(np.median(est) - 0.2) < 0.05

    def test_mse_matches_direct(self):
        rng = np.random.default_rng(9)
        data = signal_data(rng, 60, pi1=0.3)
        M = np.maximum(bl.ranks(data.p1), bl.ranks(data.p2))
        m = data.m
        s_hat = lambda x: np.mean(M / m >= x)  # noqa: E731
        direct = []
        for i in range(int(0.9 * m) + 1):
            pi1 = i / m
            grid = np.arange(i, m + 1) / m
            resid = [s_hat(x) - (1 - pi1) * bl.marr_null_survival(x, pi1) for x in grid]
            direct.append(np.sum(np.square(resid)) / (m - i))
        assert bl.marr(data, 0.05).auxiliary["k_hat"] == int(np.argmin(direct))

    def test_rejection_rule(self):
        rng = np.random.default_rng(10)
        data = signal_data(rng, 500, pi1=0.2)
        res = bl.marr(data, 0.05)
        aux = res.auxiliary
        M = np.maximum(bl.ranks(data.p1), bl.ranks(data.p2))
        k, n = aux["k_hat"], aux["n_hat"]
        if n:
            q = np.count_nonzero(M <= n)
            assert (n - k) ** 2 / (q * (data.m - k)) <= 0.05
        np.testing.assert_array_equal(res.reject, M <= n)


class TestRadjust:
    def test_empty_intersection(self):
        res = bl.radjust_adaptive(paired([0.01, 0.9], [0.9, 0.01]), 0.05)
        assert res.n_rejected == 0

    def test_empty_selection(self):
        res = bl.radjust_adaptive(paired([0.01, 0.02], [0.9, 0.8]), 0.05)
        assert res.n_rejected == 0

    def test_single_strong_feature(self):
        p = np.full(50, 0.99)
        p[0] = 1e-8
        res = bl.radjust_adaptive(paired(p, p), 0.05)
        np.testing.assert_array_equal(np.flatnonzero(res.reject), [0])

    def test_duplication(self):
        rng = np.random.default_rng(11)
        data = signal_data(rng, 2000, pi1=0.1, strength=20)
        twice = paired(np.r_[data.p1, data.p1], np.r_[data.p2, data.p2])
        a = bl.radjust_adaptive(data, 0.05).auxiliary
        b = bl.radjust_adaptive(twice, 0.05).auxiliary
        assert b["n_selected1"] == 2 * a["n_selected1"]
        assert b["pi0_1"] == pytest.approx(a["pi0_1"], abs=1.0 / (a["n_selected2"] * 0.95))

    def test_fixed_point_definition(self):
        rng = np.random.default_rng(12)
        data = signal_data(rng, 1000, pi1=0.1, strength=20)
        res = bl.radjust_adaptive(data, 0.05)
        aux = res.auxiliary
        c1 = 0.05 / (2 * aux["n_selected2"] * aux["pi0_1"])
        c2 = 0.05 / (2 * aux["n_selected1"] * aux["pi0_2"])
        both = (data.p1 <= 0.05) & (data.p2 <= 0.05)

        def count(r):
            return int(np.count_nonzero(both & (data.p1 <= r * c1) & (data.p2 <= r * c2)))

        fixed = [r for r in range(both.sum() + 1) if count(r) == r]
        assert aux["R"] == max(fixed)
        assert res.n_rejected == aux["R"]


@pytest.mark.parametrize("method", bl.METHODS)
def test_permutation_equivariance(method):
    rng = np.random.default_rng(13)
    data = signal_data(rng, 400, pi1=0.1, strength=30)
    perm = rng.permutation(data.m)
    shuffled = paired(data.p1[perm], data.p2[perm])
    a = bl.run_baseline(method, data, 0.05).reject
    b = bl.run_baseline(method, shuffled, 0.05).reject
    np.testing.assert_array_equal(a[perm], b)


def test_unknown_method():
    with pytest.raises(ValueError):
        bl.run_baseline("idr", paired([0.1], [0.2]), 0.05)
