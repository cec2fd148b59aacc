"""Greedy combinatorial auction for multi-unit single-minded bidders.

Marginal bids are processed in decreasing order; a bid is accepted when one
unit of every good in the bidder's set is still available.  Each accepted copy
is charged the critical price of the set: for every good j in the set, re-run
the greedy pass with unlimited copies of j (other supplies unchanged) and read
off the (k_j + 1)-th highest accepted bid on a set containing j; the critical
price is the largest of these.

Ties between equal bids are resolved by a priority over (player, marginal)
pairs, shared by the real run and every shadow run.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model import (
    CapacityError, Estimate, GreedyBid, ParameterError, RngLike, SupplyModel,
    Valuation, ValidationError, as_generator, eval_valuation, sample_supply,
    validate_bid_profile,
)

EXACT_MAX_SUPPLY = 10_000
EXACT_MAX_ORDERS = 10_000

Priority = list  # priority[i][l]: smaller is served first among equal bids


def default_priority(bids) -> Priority:
    r = max((len(b.marginals) for b in bids), default=0)
    return [[i * (r + 1) + l for l in range(len(b.marginals))] for i, b in enumerate(bids)]


def draw_priority(bids, rng: RngLike) -> Priority:
    """Uniform random priority over (player, marginal) pairs.

    Keys within a player are sorted so that a player's earlier marginal is
    always served before its later ones; the interleaving across players is
    uniform.
    """
    gen = as_generator(rng)
    total = sum(len(b.marginals) for b in bids)
    keys = gen.permutation(total)
    out, pos = [], 0
    for b in bids:
        c = len(b.marginals)
        out.append(sorted(keys[pos: pos + c].tolist()))
        pos += c
    return out


@dataclass
class GreedyOutcome:
    alloc: np.ndarray  # copies of T_i received
    critical: np.ndarray  # per-copy critical price of T_i
    payments: np.ndarray
    revenue: float
    trace: list = field(default_factory=list)  # (player, marginal index, accepted)
    thresholds: dict = field(default_factory=dict)  # good -> shadow threshold at k_j + 1


def _check(bids, m):
    bad = validate_bid_profile(list(bids))
    for i, b in enumerate(bids):
        if not b.goods or any(not 0 <= j < m for j in b.goods):
            raise ParameterError(f"player {i}: interest set {b.goods} empty or outside 0..{m - 1}")
    if bad:
        raise ValidationError(bad)


def _order(bids, priority, active):
    items = []
    for i, b in enumerate(bids):
        if active is not None and not active[i]:
            continue
        for l, x in enumerate(b.marginals):
            items.append((-x, priority[i][l], i, l))
    items.sort()
    return items


def _greedy_pass(bids, k, order):
    remaining = np.array(k, dtype=np.int64)
    alloc = np.zeros(len(bids), dtype=int)
    trace = []
    for _, _, i, l in order:
        goods = bids[i].goods
        ok = all(remaining[j] >= 1 for j in goods)
        if ok:
            for j in goods:
                remaining[j] -= 1
            alloc[i] += 1
        trace.append((i, l, ok))
    return alloc, trace


def shadow_threshold(j: int, t: int, bids, k, priority: Priority | None = None,
                     active=None, _order_cache=None) -> float:
    """t-th highest accepted bid on a set containing ``j`` with unlimited copies of j."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if priority is None:
        priority = default_priority(bids)
    order = _order_cache if _order_cache is not None else _order(bids, priority, active)
    kk = np.array(k, dtype=np.int64).copy()
    kk[j] = len(order) + 1
    _, trace = _greedy_pass(bids, kk, order)
    accepted = [bids[i].marginals[l] for i, l, ok in trace if ok and j in bids[i].goods]
    # the trace is in decreasing bid order already
    return float(accepted[t - 1]) if len(accepted) >= t else 0.0


def run_greedy(bids, k, rng: RngLike = None, priority: Priority | None = None,
               active=None, check: bool = True) -> GreedyOutcome:
    bids = list(bids)
    k = np.asarray(k, dtype=np.int64).ravel()
    if check:
        _check(bids, len(k))
    if priority is None:
        priority = draw_priority(bids, rng) if rng is not None else default_priority(bids)
    order = _order(bids, priority, active)
    alloc, trace = _greedy_pass(bids, k, order)
    goods = sorted({j for i, b in enumerate(bids) if alloc[i] > 0 for j in b.goods})
    theta = {j: shadow_threshold(j, int(k[j]) + 1, bids, k, priority, active, order) for j in goods}
    critical = np.zeros(len(bids))
    for i, b in enumerate(bids):
        if alloc[i] > 0:
            critical[i] = max(theta[j] for j in b.goods)
    payments = alloc * critical
    return GreedyOutcome(alloc, critical, payments, float(payments.sum()), trace, theta)


def critical_price(i: int, bids, k, priority: Priority | None = None, active=None) -> float:
    """max over j in T_i of the shadow threshold at level k_j + 1."""
    bids = list(bids)
    if priority is None:
        priority = default_priority(bids)
    order = _order(bids, priority, active)
    return max(shadow_threshold(j, int(k[j]) + 1, bids, k, priority, active, order)
               for j in bids[i].goods)


def bundle_vector(goods, copies: int, m: int) -> np.ndarray:
    x = np.zeros(m, dtype=int)
    x[list(goods)] = copies
    return x


def greedy_utility(out: GreedyOutcome, bids, v: Valuation, i: int) -> float:
    x = bundle_vector(bids[i].goods, int(out.alloc[i]), v.m)
    return eval_valuation(v, x) - float(out.payments[i])


# ---------------------------------------------------------------------------
# exact averaging over tie priorities


def priority_orders(bids, i: int | None = None, limit: int = EXACT_MAX_ORDERS):
    """All tie resolutions that can matter, with their probabilities.

    Pairs with equal bid values from different players form tie classes.  A
    class whose pairs all come from players with identical bid records (none
    of them ``i``) is left in a fixed order, since exchanging identical
    opponents cannot change anything about ``i``.  Every other class is
    enumerated over its distinct interleavings, which are equally likely
    under a uniform pair priority.  Yields (priority, probability).
    """
    base = default_priority(bids)
    classes: dict = {}
    for p, b in enumerate(bids):
        for l, x in enumerate(b.marginals):
            classes.setdefault(x, []).append((p, l))
    varying = []
    for pairs in classes.values():
        players = sorted({p for p, _ in pairs})
        if len(players) < 2:
            continue
        records = {(bids[p].goods, bids[p].marginals) for p in players}
        if len(records) == 1 and (i is None or i not in players):
            continue
        varying.append(pairs)
    seqs = []
    total = 1
    for pairs in varying:
        labels = [p for p, _ in pairs]
        distinct = sorted(set(itertools.permutations(labels))) if len(labels) <= 9 else None
        if distinct is None:
            raise CapacityError(f"tie class of {len(labels)} bids is too large to enumerate")
        total *= len(distinct)
        if total > limit:
            raise CapacityError(f"more than {limit} tie resolutions")
        seqs.append((pairs, distinct))
    for combo in itertools.product(*[d for _, d in seqs]):
        prio = [list(row) for row in base]
        for (pairs, _), seq in zip(seqs, combo):
            by_player: dict = {}
            for p, l in sorted(pairs):
                by_player.setdefault(p, []).append(l)
            offset = -len(seq) - 1
            for rank, p in enumerate(seq):
                l = by_player[p].pop(0)
                prio[p][l] = offset + rank - 10**9
        yield prio, 1.0 / total


def expected_utility_over_supply(bids, v: Valuation, i: int, model: SupplyModel,
                                 mode: str = "exact", rng: RngLike = None,
                                 trials: int = 10_000, active=None) -> Estimate:
    """E_k[u_i(b)] over the supply distribution (and tie priorities)."""
    bids = list(bids)
    _check(bids, model.m)
    if mode == "exact":
        support = model.support()
        if len(support) > EXACT_MAX_SUPPLY:
            raise CapacityError(f"{len(support)} supply vectors exceed {EXACT_MAX_SUPPLY}")
        orders = list(priority_orders(bids, i))
        total = 0.0
        for k, pk in support:
            for prio, po in orders:
                out = run_greedy(bids, k, priority=prio, active=active, check=False)
                total += pk * po * greedy_utility(out, bids, v, i)
        return Estimate.exact(total)
    gen = as_generator(rng)
    vals = np.empty(trials)
    for t in range(trials):
        k = sample_supply(model, gen)
        out = run_greedy(bids, k, priority=draw_priority(bids, gen), active=active, check=False)
        vals[t] = greedy_utility(out, bids, v, i)
    return Estimate.from_samples(vals)


def infinite_supply(bids) -> int:
    return sum(len(b.marginals) for b in bids) + 1


def max_set_size(bids) -> int:
    return max((len(b.goods) for b in bids), default=0)
