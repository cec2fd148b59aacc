import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import binom

from large_poa import smoothness as S
from large_poa.model import (
    AdditiveMarginal, FixedSupply, MarketConfig, ParameterError, RngStream, SingleMinded, UnitDemand,
)
from large_poa.welfare import OptResult, optimal_welfare


def test_deviation_zero_allocation():
    opt = OptResult(0.0, np.zeros((1, 2), dtype=int), "exhaustive")
    assert not S.uniform_deviation([UnitDemand((1.0, 1.0))], opt, 2).any()


def test_deviation_unit_demand():
    opt = OptResult(3.0, np.array([[1, 0]]), "exhaustive")
    dev = S.uniform_deviation([UnitDemand((3.0, 1.0))], opt, 2, B=5)
    assert dev[0].tolist() == [[3.0, 0.0], [0.0, 0.0]]


def test_deviation_bid_cap():
    opt = OptResult(3.0, np.array([[1]]), "exhaustive")
    with pytest.raises(S.BidCapError):
        S.uniform_deviation([UnitDemand((3.0,))], opt, 1, B=2)


@pytest.mark.parametrize("curve, marg, concave", [
    ((0, 1, 2), (1.0, 1.0), True),
    ((0, 5, 6), (5.0, 1.0), True),
    ((0, 1, 4), (2.0, 2.0), False),
    ((0, 0, 3, 3), (1.5, 1.5, 0.0), False),
])
def test_concave_marginals(curve, marg, concave):
    got, was = S.concave_marginals(curve)
    assert got == pytest.approx(marg) and was == concave


def test_truthful_deviation_flags_nonconcave():
    v = [SingleMinded((0,), (0, 1, 4), 1), SingleMinded((0,), (0, 5, 6), 1)]
    bids, flagged = S.greedy_truthful_deviation(v)
    assert flagged == [0] and bids[1].marginals == (5.0, 1.0)
    with pytest.raises(S.BidCapError):
        S.greedy_truthful_deviation(v, B=2)


def test_proxy_deviation_forced_arrival():
    v = [UnitDemand((1.0,)), UnitDemand((0.75,)), UnitDemand((0.5,))]
    cfg = MarketConfig(3, 1, FixedSupply((1,)), delta=0.5)
    dev = S.random_proxy_deviation(v, cfg, RngStream(1), forced=np.array([1, 0, 1]))
    sub = S.uniform_deviation([v[0], v[2]], optimal_welfare([v[0], v[2]], [1]), 1, 1.0)
    assert dev(0).tolist() == sub[0].tolist()
    assert dev(2).tolist() == sub[1].tolist()


def test_proxy_deviation_delta_zero():
    v = [UnitDemand((1.0,)), UnitDemand((0.75,))]
    cfg = MarketConfig(2, 1, FixedSupply((1,)))
    dev = S.random_proxy_deviation(v, cfg, RngStream(1))
    full = S.uniform_deviation(v, optimal_welfare(v, [1]), 1, 1.0)
    assert dev(1).tolist() == full[1].tolist()


def test_single_player_slack_zero():
    inst = S.SmoothnessInstance([UnitDemand((1.0,))], (1,), 1, 1.0)
    rep = S.check_smoothness("uniform", "approx", 1.0, 0.7, inst)
    assert rep.min_slack == pytest.approx(0.0) and rep.ok


def three_player_instance():
    vals = [AdditiveMarginal(((1.0,),)), AdditiveMarginal(((0.75,),)), AdditiveMarginal(((0.25,),))]
    return S.SmoothnessInstance(vals, (2,), 1, 1.0, "three")


def test_three_player_grid():
    inst = three_player_instance()
    rep = S.check_smoothness("uniform", "approx", 1.0, 1.0, inst)
    assert rep.count == 5 ** 3 and rep.ok and rep.revenue_identity
    assert rep.epsilon_hat == 0.0
    assert S.recompute_slack(rep, "uniform", "approx", inst) == pytest.approx(rep.min_slack)


def test_true_utilities_can_violate():
    # the same check on true utilities fails somewhere in the battery, so the grid has teeth
    worst = min(S.check_smoothness("uniform", "true", 1.0, 1.0, inst).min_slack
                for inst in S.uniform_battery(0)[:12])
    assert worst < 0


def test_epsilon_hat_invariant():
    inst = S.uniform_battery(0)[5]
    rep = S.check_smoothness("uniform", "true", 1.0, 1.0, inst)
    if rep.opt > 0:
        assert rep.epsilon_hat == pytest.approx(max(0.0, -rep.min_slack) / rep.opt)
    assert S.recompute_slack(rep, "uniform", "true", inst) == pytest.approx(rep.min_slack)


def test_random_profiles_source():
    inst = three_player_instance()
    rep = S.check_smoothness("uniform", "approx", 1.0, 1.0, inst, S.RandomProfiles(200, RngStream(3)))
    assert rep.count == 200 and rep.ok and rep.revenue_identity
    assert S.recompute_slack(rep, "uniform", "approx", inst) == pytest.approx(rep.min_slack)


def test_greedy_gap_instance_smooth():
    inst = S.gap_instance()
    d = S.max_set_size(inst)
    assert d == 2
    grid = S.check_smoothness("greedy", "approx", 1.0, d, inst, S.Grid(step=0.5))
    rand = S.check_smoothness("greedy", "approx", 1.0, d, inst, S.RandomProfiles(300, RngStream(4)))
    assert grid.ok and rand.ok


def test_bid_grid_shapes():
    levels = [0.0, 0.5, 1.0]
    grid = S.bid_grid_uniform(2, 2, levels)
    assert grid.shape == (36, 2, 2)
    assert np.all(np.diff(grid, axis=2) <= 0)


# rate formulas

BASE = S.RateInputs(epsilon=0.1, delta=0.5)


def test_required_supply_r1_value():
    assert S.required_supply_r1(BASE) == 57600


def test_epsilon_halved_quadruples():
    half = S.RateInputs(0.05, 0.5)
    assert S.required_supply_r1(half) == 4 * S.required_supply_r1(BASE)


def test_delta_ratio():
    q = S.RateInputs(0.1, 0.25)
    assert S.required_supply_r1(q) / S.required_supply_r1(BASE) == pytest.approx(4 / 3, rel=1e-4)


def test_required_supply_general_value():
    assert S.required_supply_general(BASE) == 25601


def test_r_doubling():
    a = S.RateInputs(0.1, 0.5, r=1)
    b = S.RateInputs(0.1, 0.5, r=2)
    assert (S.required_supply_general(b) - 2) == pytest.approx(256 * (S.required_supply_general(a) - 1), rel=1e-6)


def test_constants_disagree_at_r1():
    assert S.required_supply_r1(BASE) != S.required_supply_general(BASE)


def test_invalid_rate_inputs():
    with pytest.raises(ParameterError):
        S.RateInputs(0.1, 1.0)
    with pytest.raises(ParameterError):
        S.RateInputs(0.0, 0.5)


@given(st.floats(0.05, 1.0), st.floats(0.05, 0.95), st.integers(1, 3), st.floats(0.5, 2.0),
       st.integers(1, 3), st.floats(0.5, 2.0))
def test_threshold_monotonicity(eps, delta, m, B, r, rho):
    base = S.RateInputs(eps, delta, m, B, 1.0, r, rho)
    for f in (S.required_supply_r1, S.required_supply_general):
        k = f(base)
        assert f(S.RateInputs(eps * 1.5, delta, m, B, 1.0, r, rho)) <= k
        assert f(S.RateInputs(eps, delta, m + 1, B, 1.0, r, rho)) >= k
        assert f(S.RateInputs(eps, delta, m, B * 1.5, 1.0, r, rho)) >= k
        assert f(S.RateInputs(eps, delta, m, B, 1.0, r, rho * 1.5)) >= k
    assert S.required_supply_general(S.RateInputs(eps, delta, m, B, 1.0, r + 1, rho)) >= \
        S.required_supply_general(base)
    closer = 0.5 + 0.5 * (delta - 0.5)
    assert S.required_supply_r1(S.RateInputs(eps, closer, m, B, 1.0, r, rho)) <= S.required_supply_r1(base)


# binomial bounds and tails


def test_binomial_bound_example():
    assert S.binomial_pmf_bound(100, 0.5) == pytest.approx(0.4)
    assert S.max_binomial_pmf(100, 0.5) == pytest.approx(0.0796, abs=1e-4)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_binomial_bound_t1(p):
    assert S.binomial_pmf_bound(1, p) >= 1.0


def test_binomial_sweep_dominated():
    assert S.binomial_bound_violations([4, 16, 64, 256], [0.1, 0.3, 0.5]) == []


def test_binomial_bound_rejects_bad_args():
    with pytest.raises(ParameterError):
        S.binomial_pmf_bound(0, 0.5)


def test_tail_point_mass_below():
    b = np.full((10, 1, 1), 0.25)
    pmf = S.tail_estimator(b, 0.5, 0.5, 10_000, RngStream(1))
    assert list(pmf) == [0] and pmf[0].mean == 1.0


def test_tail_matches_binomial():
    t = 40
    b = np.ones((t, 1, 1))
    pmf = S.tail_estimator(b, 0.5, 0.5, 100_000, RngStream(2))
    exact = binom.pmf(np.arange(t + 1), t, 0.5)
    for q, e in pmf.items():
        assert abs(e.mean - exact[q]) <= 4 * e.stderr + 1e-4


def test_tail_threshold():
    assert S.tail_threshold(0.25, 0.5) == 257
    assert S.tail_threshold(0.5, 0.5, r=2) == 257


def test_tail_check_large_profile():
    b = np.ones((800, 1, 1))
    ok, q, e = S.tail_check(b, 0.5, 0.5, 0.25, 1, 20_000, RngStream(3))
    assert ok and e.mean <= 0.25


def test_point_probability_matches_binomial():
    b = np.ones((60, 1, 1))
    e = S.point_probability(b, 0.5, 30, 0.5, 50_000, RngStream(4))
    assert abs(e.mean - binom.pmf(30, 60, 0.5)) <= 4 * e.stderr


def test_pmf_bound_for_profile_dominates():
    b = np.concatenate([np.ones((50, 1, 1)), np.zeros((5, 1, 1))])
    assert S.pmf_bound_for_profile(b, 0.5, 0.5) >= S.max_binomial_pmf(50, 0.5)
    assert S.pmf_bound_for_profile(np.zeros((3, 1, 1)), 0.5, 0.5) == 1.0


def test_cdf_gap_lemma():
    gen = np.random.default_rng(9)
    b = -np.sort(-gen.choice([0.25, 0.5, 0.75, 1.0], size=(200, 1, 2)), axis=2)
    excess, allowance = S.cdf_gap_check(b, [0.25, 0.5, 0.75], 60, 2, 0.5, 20_000, RngStream(5))
    assert excess <= allowance


def test_noisy_proxy_smoothness_miniature():
    from large_poa.welfare import supply_example_valuations

    v = supply_example_valuations(2)
    cfg = MarketConfig(6, 2, FixedSupply((1, 2)), delta=0.3, B=1, H=1, rho=0.5)
    gen = np.random.default_rng(6)
    for trial in range(5):
        b = gen.choice([0.0, 0.5, 1.0], size=(6, 2, 1))
        lhs, rhs = S.noisy_proxy_smoothness(v, b, cfg, 400, RngStream(6, trial))
        assert lhs.mean >= rhs.mean - 3 * math.hypot(lhs.stderr, rhs.stderr)
