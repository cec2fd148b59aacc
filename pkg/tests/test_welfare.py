import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from large_poa import greedy as G
from large_poa import uniform as U
from large_poa import welfare as W
from large_poa.model import (
    AdditiveMarginal, CapacityError, CappedCombinatorial, GreedyBid, RngStream,
    SingleMinded, UniformIntegerSupply, UnitDemand,
)


def test_all_zero():
    vals = [UnitDemand((0.0, 0.0))] * 3
    assert W.opt_exhaustive(vals, [2, 2]).value == 0.0


def test_example1_matches_sort_oracle(gen):
    hi = gen.uniform(2, 3, size=3)
    lo = gen.uniform(0, 1, size=3)
    vals = [AdditiveMarginal(((h, l),)) for h, l in zip(hi, lo)]
    res = W.opt_exhaustive(vals, [3])
    assert res.value == pytest.approx(np.sort(np.r_[hi, lo])[::-1][:3].sum())
    assert W.opt_additive(vals, [3]).value == pytest.approx(res.value)


def test_supply_example_instance():
    vals = W.supply_example_valuations(4)
    assert W.opt_exhaustive(vals, [3, 2]).value == pytest.approx(4.5)
    assert W.closed_form_supply_example_opt(4, 3, 2) == 4.5
    assert W.closed_form_supply_example_opt(7, 0, 0) == 0.0


def test_closed_form_sweep():
    vals = W.supply_example_valuations(6)
    for ka, kb in itertools.product(range(7), repeat=2):
        assert W.opt_unit_demand(vals, [ka, kb]).value == pytest.approx(
            W.closed_form_supply_example_opt(6, ka, kb))


def test_closed_form_sweep_exhaustive_small():
    vals = W.supply_example_valuations(3)
    for ka, kb in itertools.product(range(4), repeat=2):
        assert W.opt_exhaustive(vals, [ka, kb]).value == pytest.approx(
            W.closed_form_supply_example_opt(3, ka, kb))


def test_disjoint_single_minded():
    vals = [SingleMinded((0,), (0, 2, 3), 2), SingleMinded((1,), (0, 1, 1.5), 2)]
    res = W.opt_single_minded(vals, [2, 1])
    assert res.value == pytest.approx(3 + 1)


def test_gap_instance_single_minded():
    vals = ([SingleMinded((1,), (0, 2.0), 2), SingleMinded((0,), (0, 0.5), 2), SingleMinded((0,), (0, 0.25), 2)]
            + [SingleMinded((0, 1), (0, 1.0), 2)] * 3)
    res = W.opt_single_minded(vals, [3, 3])
    assert res.value == pytest.approx(2 + 2 + 0.5)
    assert res.allocation[0].tolist() == [0, 1] and res.allocation[1].tolist() == [1, 0]
    assert W.opt_exhaustive(vals, [3, 3]).value == pytest.approx(res.value)


def test_single_item_unit_demand_top_k(gen):
    values = gen.uniform(0, 1, size=7)
    vals = [UnitDemand((x,)) for x in values]
    assert W.opt_single_minded([SingleMinded((0,), (0, x), 1) for x in values], [3]).value == \
        pytest.approx(np.sort(values)[-3:].sum())
    assert W.opt_unit_demand(vals, [3]).value == pytest.approx(np.sort(values)[-3:].sum())


def random_single_minded(gen, n, m):
    out = []
    for _ in range(n):
        goods = tuple(sorted(gen.choice(m, int(gen.integers(1, m + 1)), replace=False).tolist()))
        inc = np.sort(gen.choice([0.0, 0.25, 0.5, 1.0], 2))[::-1]
        out.append(SingleMinded(goods, (0.0, *np.cumsum(inc)), m))
    return out


@pytest.mark.parametrize("seed", range(15))
def test_branch_bound_matches_exhaustive(seed):
    gen = np.random.default_rng(seed)
    vals = random_single_minded(gen, 5, 2)
    k = gen.integers(1, 4, size=2)
    a, b = W.opt_single_minded(vals, k), W.opt_exhaustive(vals, k)
    assert a.value == pytest.approx(b.value)
    for res in (a, b):
        assert W.is_feasible(res.allocation, k)
        assert W.reevaluate(vals, res.allocation) == pytest.approx(res.value)


@given(st.integers(0, 10**6))
def test_unit_demand_assignment_matches_exhaustive(seed):
    gen = np.random.default_rng(seed)
    vals = [UnitDemand(tuple(gen.choice([0.0, 0.5, 1.0, 2.0], 2))) for _ in range(4)]
    k = gen.integers(0, 3, size=2)
    res = W.opt_unit_demand(vals, k)
    assert res.value == pytest.approx(W.opt_exhaustive(vals, k).value)
    assert W.reevaluate(vals, res.allocation) == pytest.approx(res.value)


@given(st.integers(0, 10**6))
def test_combinatorial_witness(seed):
    gen = np.random.default_rng(seed)
    table = {x: float(gen.integers(0, 5)) for x in itertools.product(range(3), repeat=2) if any(x)}
    vals = [CappedCombinatorial.from_table(table, 2, 2), CappedCombinatorial.from_table(
        {x: v / 2 for x, v in table.items()}, 2, 2)]
    res = W.opt_exhaustive(vals, [2, 3])
    assert W.is_feasible(res.allocation, [2, 3])
    assert W.reevaluate(vals, res.allocation) == pytest.approx(res.value)
    brute = max(vals[0].value(np.array(a)) + vals[1].value(np.array(b))
                for a in itertools.product(range(3), range(4))
                for b in itertools.product(range(3), range(4))
                if a[0] + b[0] <= 2 and a[1] + b[1] <= 3)
    assert res.value == pytest.approx(brute)


def test_capacity_error():
    vals = [CappedCombinatorial(lambda x: float(sum(x)), 4, 5)] * 6
    with pytest.raises(CapacityError):
        W.opt_exhaustive(vals, [5] * 4, budget=1000)
    with pytest.raises(CapacityError):
        W.opt_single_minded([SingleMinded((0,), (0, 1), 1)] * 31, [3])


@pytest.mark.parametrize("seed", range(10))
def test_opt_dominates_mechanisms(seed):
    gen = np.random.default_rng(70 + seed)
    vals = random_single_minded(gen, 5, 2)
    k = gen.integers(1, 3, size=2)
    opt = W.opt_exhaustive(vals, k).value
    bids = [GreedyBid(v.goods, tuple(np.diff(v.curve))) for v in vals]
    out = G.run_greedy(bids, k, rng=gen)
    greedy_welfare = sum(v.curve[a] for v, a in zip(vals, out.alloc))
    assert greedy_welfare <= opt + 1e-12
    add = [AdditiveMarginal(((1.0, 0.5), (0.75, 0.25))) for _ in range(4)]
    b = np.array([[[1.0, 0.5], [0.75, 0.25]]] * 4)
    res = U.run_simultaneous(b, k, gen).with_welfare(add)
    assert res.welfare <= W.opt_exhaustive(add, k).value + 1e-12


def test_expected_opt_delta_zero():
    vals = W.supply_example_valuations(2)
    assert W.expected_opt(vals, [2, 1]).mean == W.opt_exhaustive(vals, [2, 1]).value


def test_expected_opt_mc_matches_exact():
    vals = [UnitDemand((1.0,)), UnitDemand((0.5,)), UnitDemand((0.75,)), UnitDemand((0.25,))]
    exact = W.expected_opt(vals, [2], delta=0.4)
    mc = W.expected_opt(vals, [2], delta=0.4, mode="mc", rng=RngStream(8), trials=20_000)
    assert abs(mc.mean - exact.mean) <= 4 * mc.stderr


def test_expected_opt_over_supply():
    vals = W.supply_example_valuations(3)
    model = UniformIntegerSupply((0, 0), (3, 3))
    got = W.expected_opt(vals, supply=model).mean
    want = np.mean([W.closed_form_supply_example_opt(3, a, b) for a in range(4) for b in range(4)])
    assert got == pytest.approx(want)


def test_expected_positive_part_is_one_sixth():
    gen = np.random.default_rng(11)
    x, y = gen.uniform(size=(2, 10**6))
    assert np.maximum(x + y - 1, 0).mean() == pytest.approx(1 / 6, abs=1e-3)
