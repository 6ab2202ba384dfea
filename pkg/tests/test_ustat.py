import numpy as np
import pytest

from support import brute_force_plugins, plugins_for, random_instance, rel_close
from winplan.comparison import SubjectRecord
from winplan.errors import SampleTooSmall
from winplan.scenario import EndpointSpec, MeanDifference, Normal, ScenarioSpec
from winplan.ustat import (
    PluginEstimates,
    estimate_plugins,
    exact_variance,
    large_sample_variance,
)

CONT = ScenarioSpec((EndpointSpec("continuous", Normal(0, 1), MeanDifference(0)),))


def recs(values):
    return [SubjectRecord([v]) for v in values]


def test_matches_triple_sum_oracle():
    gen = np.random.default_rng(2024)
    for _ in range(200):
        endpoints, tv, te, cv, ce = random_instance(gen)
        est = plugins_for(endpoints, tv, te, cv, ce)
        tau, xi10, xi01, xi11 = brute_force_plugins(tv, te, cv, ce, endpoints)
        assert rel_close(est.tau, tau)
        assert rel_close(est.xi10, xi10)
        assert rel_close(est.xi01, xi01)
        assert rel_close(est.xi11, xi11)


def test_small_exhaustive_case():
    est = estimate_plugins(recs([1, 3]), recs([0, 2]), CONT, clamp=False)
    # pairs: (1,0) W, (1,2) L, (3,0) W, (3,2) W
    assert est.tau_w == 0.75 and est.tau_l == 0.25
    tau, xi10, xi01, xi11 = brute_force_plugins(np.array([[1.0], [3.0]]), np.ones((2, 1), bool),
                                                np.array([[0.0], [2.0]]), np.ones((2, 1), bool),
                                                CONT.endpoints)
    assert np.allclose(est.xi10, xi10) and np.allclose(est.xi01, xi01)


def test_all_ties():
    est = estimate_plugins(recs([4, 4, 4]), recs([4, 4]), CONT)
    assert est.tau_w == est.tau_l == 0
    for block in (est.xi10, est.xi01, est.xi11):
        assert np.all(block == 0)


def test_identities():
    gen = np.random.default_rng(1)
    est = estimate_plugins(gen.normal(size=(50, 1)), gen.normal(size=(40, 1)), CONT)
    assert est.tau_w + est.tau_l + est.tau_tie == pytest.approx(1.0, abs=1e-12)
    assert est.xi11[0, 1] == pytest.approx(-est.tau_w * est.tau_l, abs=1e-12)
    assert est.xi11[0, 0] == pytest.approx(est.tau_w * (1 - est.tau_w), abs=1e-12)
    for block in (est.xi10, est.xi01, est.xi11):
        assert block[0, 0] >= 0 and block[1, 1] >= 0


def test_clamping_reported():
    # a single winning treatment row and no spread: xi10_ww is negative before clamping
    raw = estimate_plugins(recs([1, 3]), recs([2, 0]), CONT, clamp=False)
    clamped = estimate_plugins(recs([1, 3]), recs([2, 0]), CONT)
    negatives = [k for k in range(2) if raw.xi10[k, k] < 0 or raw.xi01[k, k] < 0]
    if negatives:
        assert clamped.clamped
    assert np.all(np.diag(clamped.xi10) >= 0) and np.all(np.diag(clamped.xi01) >= 0)


def test_too_small():
    with pytest.raises(SampleTooSmall):
        estimate_plugins(recs([1]), recs([2, 3]), CONT)


def test_vector_round_trip():
    gen = np.random.default_rng(9)
    est = estimate_plugins(gen.normal(size=(20, 1)), gen.normal(size=(25, 1)), CONT)
    back = PluginEstimates.from_vector(est.vector())
    assert back.tau_w == est.tau_w
    assert np.array_equal(back.xi01, est.xi01)
    assert est.xi("w", "l", "10") == est.xi10[0, 1]
    assert set(est.to_dict()) >= {"tau_w", "xi_wl_01", "xi_ll_11"}


def fixed_estimates():
    xi10 = np.array([[0.03, -0.01], [-0.01, 0.025]])
    xi01 = np.array([[0.02, -0.012], [-0.012, 0.03]])
    tw, tl = 0.5, 0.35
    xi11 = np.diag([tw, tl]) - np.outer([tw, tl], [tw, tl])
    return PluginEstimates(tw, tl, xi10, xi01, xi11)


class TestVariance:
    def test_zero_xi(self):
        z = np.zeros((2, 2))
        v = exact_variance(PluginEstimates(0.5, 0.3, z, z, z), 10, 10)
        assert (v.var_w, v.var_l, v.cov_wl) == (0.0, 0.0, 0.0)

    def test_one_by_one(self):
        est = fixed_estimates()
        v = exact_variance(est, 1, 1)
        assert v.var_w == pytest.approx(est.xi11[0, 0])
        assert v.cov_wl == pytest.approx(est.xi11[0, 1])

    def test_large_sample_gap_shrinks(self):
        est = fixed_estimates()
        gaps = []
        for m in (100, 10_000):
            e = exact_variance(est, m, m)
            a = large_sample_variance(est, m, 1.0)
            gaps.append(abs(e.var_w - a.var_w) * m * m)
        # the scaled gap is O(1): it settles to a constant
        assert gaps[1] == pytest.approx(gaps[0], rel=0.05)

    def test_var_of_linear_combination(self):
        v = exact_variance(fixed_estimates(), 50, 60)
        assert v.var_of(1, -1) == pytest.approx(v.var_w + v.var_l - 2 * v.cov_wl)
