"""Simultaneous uniform price auctions with random tie-breaking and noisy arrival.

Each good is sold separately: the ``k`` highest marginal bids win and every
unit is charged the (k+1)-th highest marginal bid (0 when fewer than k+1
marginal bids were submitted).  Bids tied at the threshold are served by
processing the tied bidders in a random order, each taking all of their tied
bids before the next bidder is served.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import (
    CapacityError, DimensionError, Estimate, MarketConfig, RngLike, ValidationError,
    Valuation, arrival_configurations, as_generator, eval_valuation, sample_arrival,
    validate_bid_profile,
)

EXACT_MAX_PLAYERS = 20


def kth_highest(values, t: int) -> float:
    """The t-th highest entry of ``values`` (1-based), or 0 if there are fewer."""
    flat = np.asarray(values, dtype=float).ravel()
    if t < 1:
        raise ValueError("t must be >= 1")
    if flat.size < t:
        return 0.0
    return float(np.partition(flat, flat.size - t)[flat.size - t])


@dataclass
class UniformOutcome:
    alloc: np.ndarray  # (n, m) units won
    price: np.ndarray  # (m,) uniform price per good
    payments: np.ndarray  # (n,)
    revenue: float
    welfare: float | None = None

    def with_welfare(self, valuations) -> "UniformOutcome":
        self.welfare = float(sum(eval_valuation(v, self.alloc[i]) for i, v in enumerate(valuations)))
        return self


def _as_profile(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim == 2:
        b = b[:, None, :]
    if b.ndim != 3:
        raise DimensionError(f"bid profile must have shape (n, m, r), got {b.shape}")
    return b


def run_single_good(bids, k: int, order=None, active=None, check: bool = True):
    """Run one uniform price auction.

    ``bids`` has shape (n, r); ``order`` is the tie-break permutation of player
    indices (identity when omitted); players with ``active[i] == False`` are
    removed from the market.  Returns (alloc, price).
    """
    bids = np.asarray(bids, dtype=float)
    if bids.ndim == 1:
        bids = bids[:, None]
    n = bids.shape[0]
    if check:
        bad = validate_bid_profile(bids[:, None, :])
        if bad:
            raise ValidationError(bad)
    if k < 0:
        raise ValueError("supply must be nonnegative")
    act = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    alloc = np.zeros(n, dtype=int)
    live = bids[act]
    price = kth_highest(live, k + 1)
    if k == 0:
        return alloc, price
    above = (bids > price).sum(axis=1) * act
    alloc += above
    remaining = k - int(above.sum())
    if remaining > 0:
        tied = (bids == price).sum(axis=1) * act
        seq = np.arange(n) if order is None else np.asarray(order)
        served = tied[seq]
        before = np.cumsum(served) - served
        alloc[seq] += np.clip(remaining - before, 0, served)
    return alloc, price


def run_simultaneous(b, k, rng: RngLike = None, orders=None, active=None,
                     check: bool = True) -> UniformOutcome:
    b = _as_profile(b)
    n, m, _ = b.shape
    k = np.asarray(k, dtype=int).ravel()
    if k.shape[0] != m:
        raise DimensionError(f"supply vector of length {k.shape[0]} for {m} goods")
    if check:
        bad = validate_bid_profile(b)
        if bad:
            raise ValidationError(bad)
    if orders is None:
        gen = as_generator(rng)
        orders = [gen.permutation(n) for _ in range(m)]
    alloc = np.zeros((n, m), dtype=int)
    price = np.zeros(m)
    for j in range(m):
        alloc[:, j], price[j] = run_single_good(b[:, j, :], int(k[j]), orders[j], active, check=False)
    payments = alloc @ price
    return UniformOutcome(alloc, price, payments, float(payments.sum()))


def utility(out: UniformOutcome, v: Valuation, i: int) -> float:
    return eval_valuation(v, out.alloc[i]) - float(out.payments[i])


# ---------------------------------------------------------------------------
# exact expectation over tie-break orders


def tied_units_pmf(own_tied: int, others_tied, capacity: int) -> np.ndarray:
    """Distribution of units a tied bidder receives under a uniform random order.

    ``own_tied`` bids of the bidder sit at the threshold together with the
    tied bid counts ``others_tied`` of the other tied bidders; ``capacity``
    units are left for the tied group.  The bidder's position is uniform, so
    the set served before it is a uniform subset of each size; a DP over
    (subset size, units consumed) gives the exact distribution.
    """
    pmf = np.zeros(own_tied + 1)
    capacity = max(int(capacity), 0)
    if own_tied == 0 or capacity == 0:
        pmf[0] = 1.0
        return pmf
    others = [int(e) for e in others_tied if e > 0]
    T = len(others)
    # dist[s, u]: probability that a uniform size-s subset of the first t
    # others consumes u units (u capped at capacity)
    dist = np.zeros((T + 1, capacity + 1))
    dist[0, 0] = 1.0
    for t, e in enumerate(others, start=1):
        new = np.zeros_like(dist)
        for s in range(0, t + 1):
            if s < t:
                new[s] += (t - s) / t * dist[s]
            if s > 0:
                shifted = np.zeros(capacity + 1)
                src = dist[s - 1]
                if e >= capacity:
                    shifted[capacity] = src.sum()
                else:
                    shifted[e:] = src[: capacity + 1 - e]
                    shifted[capacity] += src[capacity + 1 - e:].sum()
                new[s] += s / t * shifted
        dist = new
    before = dist.sum(axis=0) / (T + 1)
    for u, p in enumerate(before):
        if p:
            pmf[min(own_tied, capacity - u)] += p
    return pmf


def unit_distribution(bids_good, i: int, k: int, active=None):
    """(price, pmf of units won by i) for one good, exact over tie orders."""
    bids_good = np.asarray(bids_good, dtype=float)
    n, r = bids_good.shape
    act = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    pmf = np.zeros(r + 1)
    if not act[i] or k == 0:
        pmf[0] = 1.0
        return kth_highest(bids_good[act], k + 1), pmf
    price = kth_highest(bids_good[act], k + 1)
    above = (bids_good > price).sum(axis=1) * act
    tied = (bids_good == price).sum(axis=1) * act
    capacity = k - int(above.sum())
    others = [int(tied[p]) for p in range(n) if p != i]
    sub = tied_units_pmf(int(tied[i]), others, capacity)
    pmf[above[i]: above[i] + sub.size] += sub
    return price, pmf


def expected_value(v: Valuation, pmfs) -> float:
    """E[v(x)] when the per-good unit counts are independent with ``pmfs``."""
    supports = [np.flatnonzero(p) for p in pmfs]
    total = 0.0
    for combo in itertools.product(*supports):
        w = 1.0
        for p, c in zip(pmfs, combo):
            w *= p[c]
        total += w * eval_valuation(v, np.array(combo))
    return total


def expected_utility(b, v: Valuation, i: int, k, active=None) -> float:
    """Utility of player i averaged exactly over the per-good tie-break orders."""
    b = _as_profile(b)
    k = np.asarray(k, dtype=int).ravel()
    pmfs, pay = [], 0.0
    for j in range(b.shape[1]):
        price, pmf = unit_distribution(b[:, j, :], i, int(k[j]), active)
        pmfs.append(pmf)
        pay += price * float(pmf @ np.arange(pmf.size))
    return expected_value(v, pmfs) - pay


def noisy_expected_utility(b, v: Valuation, i: int, cfg: MarketConfig, mode: str = "exact",
                           rng: RngLike = None, trials: int = 10_000, k=None) -> Estimate:
    """E[z_i * u_i(b . z)] under independent arrivals with failure probability delta.

    ``mode="exact"`` enumerates arrivals (grouping identical opponents) and
    averages tie-breaks exactly; ``mode="mc"`` simulates the mechanism.
    The supply is ``k`` if given, otherwise the fixed supply of ``cfg``.
    """
    b = _as_profile(b)
    n = b.shape[0]
    if k is None:
        k = np.array(cfg.supply.k)
    if mode == "exact":
        if n > EXACT_MAX_PLAYERS:
            raise CapacityError(f"exact arrival enumeration supports n <= {EXACT_MAX_PLAYERS}")
        total = 0.0
        for active, prob in arrival_configurations(list(b), i, cfg.delta):
            total += prob * expected_utility(b, v, i, k, active)
        return Estimate.exact((1.0 - cfg.delta) * total)
    gen = as_generator(rng)
    out = np.zeros(trials)
    for t in range(trials):
        z = sample_arrival(cfg.delta, n, gen).astype(bool)
        if not z[i]:
            continue
        res = run_simultaneous(b, k, gen, active=z, check=False)
        out[t] = utility(res, v, i)
    return Estimate.from_samples(out)
