"""Exact optimal welfare: exhaustive search, branch and bound, closed forms."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import (
    AdditiveMarginal, CapacityError, Estimate, RngLike, SingleMinded, SupplyModel,
    UnitDemand, Valuation, arrival_configurations, as_generator, eval_valuation,
    sample_arrival, sample_supply,
)

EXHAUSTIVE_BUDGET = 10**7


@dataclass
class OptResult:
    value: float
    allocation: np.ndarray  # (n, m) units per player and good
    method: str  # "exhaustive" | "branch-bound" | "closed-form" | "per-good" | "assignment"


def reevaluate(valuations: Sequence[Valuation], allocation) -> float:
    return float(sum(eval_valuation(v, allocation[i]) for i, v in enumerate(valuations)))


def is_feasible(allocation, k) -> bool:
    allocation = np.asarray(allocation)
    return bool(np.all(allocation >= 0) and np.all(allocation.sum(axis=0) <= np.asarray(k)))


def opt_exhaustive(valuations: Sequence[Valuation], k, r: int | None = None,
                   budget: int = EXHAUSTIVE_BUDGET) -> OptResult:
    """Globally optimal allocation by depth-first search over clamped bundles.

    Each player's candidates are the vectors in {0..min(r, k_j)}^m; a bundle is
    dropped when a smaller one is worth at least as much.  The search is
    pruned with the sum of the remaining players' best standalone values.
    """
    k = np.asarray(k, dtype=int).ravel()
    n = len(valuations)
    if n == 0:
        return OptResult(0.0, np.zeros((0, k.size), dtype=int), "exhaustive")
    m = k.size
    cands = []
    for v in valuations:
        cap = v.r if r is None else min(r, v.r)
        ranges = [range(min(cap, int(kj)) + 1) for kj in k]
        opts = [(eval_valuation(v, x), np.array(x)) for x in itertools.product(*ranges)]
        # drop bundles dominated by a component-wise smaller bundle of equal or higher value
        opts.sort(key=lambda t: (t[1].sum(), -t[0]))
        kept = []
        for val, x in opts:
            if any(kv >= val and np.all(kx <= x) for kv, kx in kept):
                continue
            kept.append((val, x))
        kept.sort(key=lambda t: -t[0])
        cands.append(kept)
    size = math.prod(len(c) for c in cands)
    if size > budget:
        raise CapacityError(f"{size} candidate combinations exceed the budget of {budget}")
    best_rest = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        best_rest[i] = best_rest[i + 1] + cands[i][0][0]
    best = [-1.0, None]
    chosen = [None] * n

    def dfs(i, remaining, acc):
        if acc + best_rest[i] <= best[0] + 1e-12:
            return
        if i == n:
            best[0] = acc
            best[1] = np.array(chosen)
            return
        for val, x in cands[i]:
            if np.all(x <= remaining):
                chosen[i] = x
                dfs(i + 1, remaining - x, acc + val)

    dfs(0, k.copy(), 0.0)
    alloc = best[1] if best[1] is not None else np.zeros((n, m), dtype=int)
    return OptResult(float(best[0]), alloc.reshape(n, m), "exhaustive")


def opt_additive(valuations: Sequence[AdditiveMarginal], k) -> OptResult:
    """Per-good top-k selection of marginal values (valid for additive concave valuations)."""
    k = np.asarray(k, dtype=int).ravel()
    n, m = len(valuations), k.size
    alloc = np.zeros((n, m), dtype=int)
    total = 0.0
    for j in range(m):
        marg = [(-x, i, l) for i, v in enumerate(valuations) for l, x in enumerate(v.marginals[j]) if x > 0]
        marg.sort()
        for negx, i, _ in marg[: k[j]]:
            alloc[i, j] += 1
            total -= negx
    return OptResult(total, alloc, "per-good")


def opt_unit_demand(valuations: Sequence[UnitDemand], k) -> OptResult:
    """Assignment of unit-demand players to individual units."""
    from scipy.optimize import linear_sum_assignment

    k = np.asarray(k, dtype=int).ravel()
    n, m = len(valuations), k.size
    unit_good = np.repeat(np.arange(m), k)
    if unit_good.size == 0 or n == 0:
        return OptResult(0.0, np.zeros((n, m), dtype=int), "assignment")
    w = np.array([[v.values[j] for j in unit_good] for v in valuations])
    rows, cols = linear_sum_assignment(w, maximize=True)
    alloc = np.zeros((n, m), dtype=int)
    for i, c in zip(rows, cols):
        if w[i, c] > 0:
            alloc[i, unit_good[c]] += 1
    return OptResult(float(w[rows, cols].sum()), alloc, "assignment")


def opt_single_minded(bidders: Sequence[SingleMinded], k) -> OptResult:
    """Branch and bound over copy counts of each bidder's set."""
    k = np.asarray(k, dtype=int).ravel()
    n, m = len(bidders), k.size
    if n > 30 or (n > 20 and any(b.r > 1 for b in bidders)):
        raise CapacityError("single-minded branch and bound supports n <= 20 (n <= 30 when r = 1)")
    order = sorted(range(n), key=lambda i: -bidders[i].curve[-1])
    masks = [np.isin(np.arange(m), bidders[i].goods).astype(int) for i in order]
    top = [bidders[i].curve[-1] for i in order]
    rest = np.concatenate([np.cumsum(top[::-1])[::-1], [0.0]])
    best = [-1.0, None]
    copies = [0] * n

    def bound(pos, remaining):
        # each remaining bidder can use at most what is left of its scarcest good
        return sum(bidders[order[q]].curve[min(bidders[order[q]].r, int(remaining[masks[q] == 1].min()))]
                   for q in range(pos, n))

    def dfs(pos, remaining, acc):
        if acc + rest[pos] <= best[0] + 1e-12:
            return
        if pos == n:
            best[0], best[1] = acc, list(copies)
            return
        if acc + bound(pos, remaining) <= best[0] + 1e-12:
            return
        b = bidders[order[pos]]
        most = min(b.r, int(remaining[masks[pos] == 1].min()))
        for c in range(most, -1, -1):
            copies[pos] = c
            dfs(pos + 1, remaining - c * masks[pos], acc + b.curve[c])
        copies[pos] = 0

    dfs(0, k.copy(), 0.0)
    alloc = np.zeros((n, m), dtype=int)
    for pos, c in enumerate(best[1]):
        alloc[order[pos]] = c * masks[pos]
    return OptResult(float(best[0]), alloc, "branch-bound")


def optimal_welfare(valuations: Sequence[Valuation], k) -> OptResult:
    """Dispatch to the fastest exact method that applies."""
    if valuations and all(isinstance(v, AdditiveMarginal) for v in valuations):
        return opt_additive(valuations, k)
    if valuations and all(isinstance(v, UnitDemand) for v in valuations):
        return opt_unit_demand(valuations, k)
    if valuations and all(isinstance(v, SingleMinded) for v in valuations) and len(valuations) <= 20:
        return opt_single_minded(valuations, k)
    return opt_exhaustive(valuations, k)


def expected_opt(valuations: Sequence[Valuation], k=None, delta: float = 0.0,
                 supply: SupplyModel | None = None, mode: str = "exact", rng: RngLike = None,
                 trials: int = 1000, optimizer: Callable | None = None) -> Estimate:
    """Expected optimum over arrivals (players absent with probability delta)
    and/or a random supply; ``k`` fixes the supply instead."""
    opt = optimizer or (lambda vals, kk: optimal_welfare(vals, kk).value)
    n = len(valuations)
    if mode == "exact":
        supports = supply.support() if supply is not None else [(tuple(np.ravel(k)), 1.0)]
        if delta == 0.0:
            arrivals = [(np.ones(n, dtype=bool), 1.0)]
        else:
            if n > 20:
                raise CapacityError("exact arrival enumeration supports n <= 20")
            arrivals = [(np.array(z, dtype=bool), math.prod(1 - delta if a else delta for a in z))
                        for z in itertools.product([0, 1], repeat=n)]
        total = 0.0
        for z, pz in arrivals:
            present = [v for v, a in zip(valuations, z) if a]
            for kk, pk in supports:
                total += pz * pk * opt(present, np.array(kk))
        return Estimate.exact(total)
    gen = as_generator(rng)
    vals = np.empty(trials)
    for t in range(trials):
        z = sample_arrival(delta, n, gen).astype(bool)
        kk = sample_supply(supply, gen) if supply is not None else np.ravel(k)
        vals[t] = opt([v for v, a in zip(valuations, z) if a], kk)
    return Estimate.from_samples(vals)


# ---------------------------------------------------------------------------
# the two-good supply example


def closed_form_supply_example_opt(t, k_a, k_b):
    """Optimum of the two-good example: min{kA + kB, t} + (kA + kB - t)^+ / 2.

    Vectorizes over numpy arrays of supplies.
    """
    s = np.asarray(k_a) + np.asarray(k_b)
    out = np.minimum(s, t) + 0.5 * np.maximum(s - t, 0)
    return float(out) if np.ndim(out) == 0 else out


def supply_example_valuations(t: int, goods: int = 2) -> list[UnitDemand]:
    """``t`` price setters worth 1/2 per good, then ``t`` flexible players worth 1 on any good."""
    out = []
    for j in range(goods):
        vals = [0.0] * goods
        vals[j] = 0.5
        out += [UnitDemand(tuple(vals))] * t
    out += [UnitDemand((1.0,) * goods)] * t
    return out
