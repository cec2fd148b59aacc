"""Approximate ("delusional") utilities and their gap to the true utilities.

In the approximate utility a bidder prices every unit at the threshold the
market would have without its own bids, and wins every marginal bid that
strictly beats that threshold.  For the uniform price auction a bid equal to
the threshold joins the tie-break together with the other bidders whose bids
sit at that threshold, served in the same per-good order as the real auction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import greedy as G
from . import uniform as U
from .model import (
    CapacityError, Estimate, FixedSupply, MarketConfig, RngLike, Valuation,
    arrival_configurations, as_generator, eval_valuation, sample_arrival, sample_supply,
)


@dataclass
class ApproxUtilityResult:
    alloc: np.ndarray  # imagined units (expected units when averaged over ties)
    prices: np.ndarray  # imagined per-unit prices
    value: float


@dataclass
class GapResult:
    true: Estimate
    approx: Estimate
    diff: Estimate  # true - approx, estimated on common random numbers

    @property
    def gap(self) -> float:
        return abs(self.diff.mean)

    @property
    def stderr(self) -> float:
        return self.diff.stderr


# ---------------------------------------------------------------------------
# uniform price auction


def _others_threshold(bids_good, i, k, act):
    others = act.copy()
    others[i] = False
    price = U.kth_highest(bids_good[others], k + 1)
    above = (bids_good > price).sum(axis=1) * others
    tied = (bids_good == price).sum(axis=1) * others
    return price, others, k - int(above.sum()), tied


def delusional_unit_distribution(bids_good, i: int, k: int, active=None):
    """(imagined price, pmf of imagined units) for one good, exact over tie orders."""
    bids_good = np.asarray(bids_good, dtype=float)
    n, r = bids_good.shape
    act = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    price, _, capacity, tied = _others_threshold(bids_good, i, k, act)
    own = bids_good[i]
    own_above = int((own > price).sum())
    own_tied = int((own == price).sum())
    sub = U.tied_units_pmf(own_tied, [int(tied[p]) for p in range(n) if p != i], capacity)
    pmf = np.zeros(r + 1)
    pmf[own_above: own_above + sub.size] += sub
    return price, pmf


def delusional_allocation(bids_good, i: int, k: int, order, active=None):
    """(imagined price, imagined units) for one good under a fixed tie order."""
    bids_good = np.asarray(bids_good, dtype=float)
    n = bids_good.shape[0]
    act = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    price, _, remaining, tied = _others_threshold(bids_good, i, k, act)
    own = bids_good[i]
    units = int((own > price).sum())
    own_tied = int((own == price).sum())
    for p in order:
        if p == i:
            units += min(own_tied, max(remaining, 0))
            break
        if tied[p]:
            remaining -= min(int(tied[p]), max(remaining, 0))
    return price, units


def uniform_approx_utility(b, v: Valuation, i: int, k, orders=None, active=None) -> ApproxUtilityResult:
    """Approximate utility of player i.  Averaged exactly over tie orders
    unless ``orders`` (one permutation per good) is given."""
    b = U._as_profile(b)
    m = b.shape[1]
    k = np.asarray(k, dtype=int).ravel()
    prices = np.zeros(m)
    if orders is not None:
        x = np.zeros(m, dtype=int)
        for j in range(m):
            prices[j], x[j] = delusional_allocation(b[:, j, :], i, int(k[j]), orders[j], active)
        return ApproxUtilityResult(x, prices, eval_valuation(v, x) - float(x @ prices))
    pmfs = []
    for j in range(m):
        prices[j], pmf = delusional_unit_distribution(b[:, j, :], i, int(k[j]), active)
        pmfs.append(pmf)
    mean_units = np.array([p @ np.arange(p.size) for p in pmfs])
    return ApproxUtilityResult(mean_units, prices, U.expected_value(v, pmfs) - float(mean_units @ prices))


# ---------------------------------------------------------------------------
# greedy auction


def greedy_approx_utility(bids, v: Valuation, i: int, k, priority=None, active=None) -> ApproxUtilityResult:
    bids = list(bids)
    k = np.asarray(k, dtype=int).ravel()
    if priority is None:
        priority = G.default_priority(bids)
    act = np.ones(len(bids), dtype=bool) if active is None else np.asarray(active, dtype=bool).copy()
    act[i] = False
    order = G._order(bids, priority, act)
    theta = max(G.shadow_threshold(j, int(k[j]) + 1, bids, k, priority, act, order)
                for j in bids[i].goods)
    X = sum(1 for x in bids[i].marginals if x > theta)
    value = eval_valuation(v, G.bundle_vector(bids[i].goods, X, v.m)) - X * theta
    return ApproxUtilityResult(np.array([X]), np.array([theta]), value)


# ---------------------------------------------------------------------------
# noisy wrappers


def _pair_exact(kind, b, v, i, k, active):
    if kind == "uniform":
        u = U.expected_utility(b, v, i, k, active)
        return u, uniform_approx_utility(b, v, i, k, active=active).value
    idx = [p for p in range(len(b)) if active is None or active[p]]
    sub = [b[p] for p in idx]
    ii = idx.index(i)
    tu = tU = 0.0
    for prio, w in G.priority_orders(sub, ii):
        out = G.run_greedy(sub, k, priority=prio, check=False)
        tu += w * G.greedy_utility(out, sub, v, ii)
        tU += w * greedy_approx_utility(sub, v, ii, k, priority=prio).value
    return tu, tU


def _pair_realized(kind, b, v, i, k, active, gen):
    if kind == "uniform":
        n, m = b.shape[0], b.shape[1]
        orders = [gen.permutation(n) for _ in range(m)]
        out = U.run_simultaneous(b, k, orders=orders, active=active, check=False)
        return U.utility(out, v, i), uniform_approx_utility(b, v, i, k, orders, active).value
    prio = G.draw_priority(b, gen)
    out = G.run_greedy(b, k, priority=prio, active=active, check=False)
    return G.greedy_utility(out, b, v, i), greedy_approx_utility(b, v, i, k, prio, active).value


def _prepare(kind, b):
    if kind == "uniform":
        return U._as_profile(b)
    if kind == "greedy":
        return list(b)
    raise ValueError(f"unknown mechanism kind {kind!r}")


def utility_pair(kind: str, b, v: Valuation, i: int, cfg: MarketConfig, mode: str = "exact",
                 rng: RngLike = None, trials: int = 10_000, k=None) -> GapResult:
    """True and approximate noisy utilities of player i on common randomness.

    Randomness covers arrivals (``cfg.delta``), the supply (``k`` if given,
    else ``cfg.supply``) and tie-breaking.  Exact mode enumerates arrivals
    (identical opponents grouped) and the supply support; ties are averaged
    exactly.
    """
    b = _prepare(kind, b)
    n = len(b)
    supply = [(tuple(np.ravel(k)), 1.0)] if k is not None else None
    if mode == "exact":
        if n > U.EXACT_MAX_PLAYERS:
            raise CapacityError(f"exact arrival enumeration supports n <= {U.EXACT_MAX_PLAYERS}")
        if supply is None:
            supply = cfg.supply.support()
            if len(supply) > G.EXACT_MAX_SUPPLY:
                raise CapacityError(f"{len(supply)} supply vectors exceed {G.EXACT_MAX_SUPPLY}")
        tu = tU = 0.0
        for active, pa in arrival_configurations(b, i, cfg.delta):
            for kk, pk in supply:
                a, c = _pair_exact(kind, b, v, i, np.array(kk), active)
                tu += pa * pk * a
                tU += pa * pk * c
        scale = 1.0 - cfg.delta
        return GapResult(Estimate.exact(scale * tu), Estimate.exact(scale * tU),
                         Estimate.exact(scale * (tu - tU)))
    gen = as_generator(rng)
    us = np.zeros(trials)
    Us = np.zeros(trials)
    for t in range(trials):
        z = sample_arrival(cfg.delta, n, gen).astype(bool)
        if not z[i]:
            continue
        kk = np.ravel(k) if k is not None else sample_supply(cfg.supply, gen)
        us[t], Us[t] = _pair_realized(kind, b, v, i, kk, z, gen)
    return GapResult(Estimate.from_samples(us), Estimate.from_samples(Us), Estimate.from_samples(us - Us))


def noisy_approx_utility(kind: str, b, v: Valuation, i: int, cfg: MarketConfig, mode: str = "exact",
                         rng: RngLike = None, trials: int = 10_000, k=None) -> Estimate:
    return utility_pair(kind, b, v, i, cfg, mode, rng, trials, k).approx


def utility_gap(kind: str, b, v: Valuation, i: int, cfg: MarketConfig, mode: str = "exact",
                rng: RngLike = None, trials: int = 10_000, k=None) -> GapResult:
    return utility_pair(kind, b, v, i, cfg, mode, rng, trials, k)


# ---------------------------------------------------------------------------
# large single-good markets with one bid per player


def unit_bid_gap(levels, counts, own_bid: float, value: float, k: int, delta: float,
                 trials: int, rng: RngLike) -> GapResult:
    """Gap for a single good with r = 1 where the opponents are given as
    ``counts[l]`` players bidding ``levels[l]``.

    Only the number of arriving opponents per level matters, so each trial
    draws one binomial per level; ties are averaged in closed form and the
    player's own arrival enters as the factor (1 - delta).  Scales to tens of
    thousands of bidders.
    """
    levels = np.asarray(levels, dtype=float)
    counts = np.asarray(counts, dtype=int)
    order = np.argsort(-levels)
    levels, counts = levels[order], counts[order]
    gen = as_generator(rng)
    arrived = gen.binomial(counts, 1.0 - delta, size=(trials, levels.size))

    def threshold(arr, lv):
        # (k+1)-th highest bid among levels lv (descending) with counts arr
        cum = np.cumsum(arr, axis=1)
        hit = cum >= k + 1
        first = np.where(hit.any(axis=1), hit.argmax(axis=1), -1)
        return np.where(first >= 0, lv[np.maximum(first, 0)], 0.0)

    def counts_vs(arr, lv, p):
        above = (arr * (lv[None, :] > p[:, None])).sum(axis=1)
        equal = (arr * (lv[None, :] == p[:, None])).sum(axis=1)
        return above, equal

    # imagined market: opponents only
    p_minus = threshold(arrived, levels)
    above_o, equal_o = counts_vs(arrived, levels, p_minus)
    cap_o = k - above_o
    win_U = np.where(own_bid > p_minus, 1.0,
                     np.where(own_bid == p_minus,
                              np.minimum(cap_o, equal_o + 1) / (equal_o + 1), 0.0))
    # real market: opponents plus the player
    lv_all = np.append(levels, own_bid)
    arr_all = np.hstack([arrived, np.ones((trials, 1), dtype=int)])
    srt = np.argsort(-lv_all, kind="stable")
    lv_all, arr_all = lv_all[srt], arr_all[:, srt]
    p_real = threshold(arr_all, lv_all)
    above_a, equal_a = counts_vs(arr_all, lv_all, p_real)
    cap_a = k - above_a
    win_u = np.where(own_bid > p_real, 1.0,
                     np.where(own_bid == p_real,
                              np.minimum(cap_a, equal_a) / np.maximum(equal_a, 1), 0.0))
    scale = 1.0 - delta
    u = scale * win_u * (value - p_real)
    Ua = scale * win_U * (value - p_minus)
    return GapResult(Estimate.from_samples(u), Estimate.from_samples(Ua), Estimate.from_samples(u - Ua))


def adversarial_battery(k: int, B: float = 1.0, H: float = 1.0, delta: float = 0.5) -> list[tuple]:
    """Single-good r = 1 profiles built to make the threshold sensitive to one bid.

    Opponent counts are chosen so that about k, k + 1 or 2k opponents arrive
    in expectation; levels sit on the B/4 grid.  Entries are
    (name, levels, counts, own bid, value).
    """
    around = int(round(k / (1.0 - delta)))
    out = []
    for x in (B / 4, B / 2, B):
        for n_opp in (around - 2, around, around + 2, 2 * around):
            out.append((f"tied-{x:g}-{n_opp}", [x], [n_opp], x, H))
            out.append((f"below-{x:g}-{n_opp}", [x], [n_opp], min(B, H), H))
    half = around // 2
    out.append(("two-level", [B, B / 2], [half, around - half], B / 2, H))
    out.append(("two-level-top", [B, B / 2], [half, around - half], B, H))
    out.append(("three-level", [B, 3 * B / 4, B / 4], [half // 2, half, around - half - half // 2], 3 * B / 4, H))
    return out


def sup_gap(k: int, delta: float, trials: int, rng, B: float = 1.0, H: float = 1.0) -> tuple[str, GapResult]:
    """Largest measured |u - U| over :func:`adversarial_battery` (independent stream per profile)."""
    from .model import RngStream

    worst = None
    for idx, (name, levels, counts, own, value) in enumerate(adversarial_battery(k, B, H, delta)):
        sub = rng.child(idx) if isinstance(rng, RngStream) else rng
        g = unit_bid_gap(levels, counts, own, value, k, delta, trials, sub)
        if worst is None or g.gap > worst[1].gap:
            worst = (name, g)
    return worst
