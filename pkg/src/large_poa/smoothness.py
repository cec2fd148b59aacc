"""Smoothness deviations, numerical smoothness checks, rate thresholds and tail bounds.

A (lambda, mu) smoothness check evaluates, at a bid profile s,

    slack(s) = sum_i U_i(dev_i, s_-i) - lambda * OPT + mu * R(s)

where ``dev`` is a fixed deviation built from the optimal allocation (uniform
auction) or from true values (greedy auction), U is the approximate or true
utility and R the revenue at s.  A negative slack is a violation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binom

from . import approx as A
from . import greedy as G
from . import uniform as U
from .model import (
    AdditiveMarginal, CappedCombinatorial, Estimate, GreedyBid, MarketConfig, ModelError,
    ParameterError, RngLike, SingleMinded, UnitDemand, Valuation, as_generator,
    eval_valuation, sample_arrival,
)
from .welfare import OptResult, optimal_welfare

TOLERANCE = 1e-9


class BidCapError(ModelError):
    """A deviation would need a bid above the cap B."""


# ---------------------------------------------------------------------------
# deviations


def uniform_deviation(v: Sequence[Valuation], opt: OptResult, r: int, B: float = math.inf) -> np.ndarray:
    """Each player bids v_i(x_i*) on its first x_ij* marginals of every good j."""
    n, m = opt.allocation.shape
    out = np.zeros((n, m, r))
    for i in range(n):
        x = np.minimum(opt.allocation[i], r)
        if not x.any():
            continue
        val = eval_valuation(v[i], opt.allocation[i])
        if val > B + 1e-12:
            raise BidCapError(f"player {i} would bid {val} > B = {B}")
        for j in range(m):
            out[i, j, : x[j]] = val
    return out


def concave_marginals(curve: Sequence[float]) -> tuple[tuple[float, ...], bool]:
    """Differences of the least concave majorant of ``curve`` and whether it was already concave."""
    c = np.asarray(curve, dtype=float)
    hull = [0]
    for x in range(1, c.size):
        # keep the upper hull of the points (x, c[x])
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (c[b] - c[a]) * (x - a) <= (c[x] - c[a]) * (b - a):
                hull.pop()
            else:
                break
        hull.append(x)
    maj = np.interp(np.arange(c.size), hull, c[hull])
    diffs = np.diff(maj)
    return tuple(float(d) for d in diffs), bool(np.allclose(maj, c, atol=1e-12))


def greedy_truthful_deviation(v: Sequence[SingleMinded], B: float = math.inf) -> tuple[list[GreedyBid], list[int]]:
    """Truthful bids (concave-hull marginals) and the players whose curve had to be concavified."""
    bids, flagged = [], []
    for i, vi in enumerate(v):
        marg, concave = concave_marginals(vi.curve)
        if not concave:
            flagged.append(i)
        if marg and max(marg) > B + 1e-12:
            raise BidCapError(f"player {i} would bid {max(marg)} > B = {B}")
        bids.append(GreedyBid(vi.goods, marg))
    return bids, flagged


def random_proxy_deviation(v: Sequence[Valuation], cfg: MarketConfig, rng: RngLike,
                           forced: np.ndarray | None = None) -> Callable[[int], np.ndarray]:
    """Randomized deviation: sample who else arrives, optimize over that
    sub-market with i present and bid i's share of the optimum.

    Returns ``dev(i) -> (m, r) bids``; every call draws a fresh arrival
    vector unless ``forced`` fixes it.
    """
    if not 0.0 <= cfg.delta < 1.0:
        raise ParameterError("delta must lie in [0, 1)")
    gen = as_generator(rng)
    k = np.array(cfg.supply.k)
    n = len(v)

    def dev(i: int) -> np.ndarray:
        z = forced.astype(bool).copy() if forced is not None else sample_arrival(cfg.delta, n, gen).astype(bool)
        z[i] = True
        idx = np.flatnonzero(z)
        opt = optimal_welfare([v[p] for p in idx], k)
        sub = uniform_deviation([v[p] for p in idx], opt, cfg.r, cfg.B)
        return sub[list(idx).index(i)]

    return dev


# ---------------------------------------------------------------------------
# smoothness checks


@dataclass(frozen=True)
class Grid:
    step: float | None = None  # default B/4


@dataclass(frozen=True)
class RandomProfiles:
    count: int
    rng: RngLike = None


@dataclass
class SmoothnessInstance:
    valuations: list
    k: tuple
    r: int
    B: float = 1.0
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.valuations)

    @property
    def m(self) -> int:
        return len(self.k)


@dataclass
class SmoothnessReport:
    lam: float
    mu: float
    count: int
    min_slack: float
    witness: object
    epsilon_hat: float
    opt: float = 0.0
    violations: int = 0
    revenue_identity: bool = True
    flags: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _levels(B: float, step: float | None) -> np.ndarray:
    step = B / 4 if step is None else step
    count = int(round(B / step))
    return np.linspace(0.0, B, count + 1)


def bid_grid_uniform(m: int, r: int, levels) -> np.ndarray:
    """Every per-player bid in (m, r) shape with non-increasing marginals on the level set."""
    seqs = [tuple(reversed(c)) for c in itertools.combinations_with_replacement(levels, r)]
    return np.array([np.array(combo) for combo in itertools.product(seqs, repeat=m)]).reshape(-1, m, r)


def bid_grid_marginals(r: int, levels) -> list[tuple[float, ...]]:
    return [tuple(reversed(c)) for c in itertools.combinations_with_replacement(levels, r)]


def _uniform_revenue(profiles: np.ndarray, k) -> tuple[np.ndarray, np.ndarray]:
    """Revenue k_j * price_j summed over goods, plus price * units actually sold."""
    P, n, m, r = profiles.shape
    rev = np.zeros(P)
    sold_rev = np.zeros(P)
    for j in range(m):
        flat = np.sort(profiles[:, :, j, :].reshape(P, n * r), axis=1)[:, ::-1]
        kj = int(k[j])
        price = flat[:, kj] if n * r > kj else np.zeros(P)
        rev += kj * price
        sold = np.minimum(kj, (flat >= price[:, None]).sum(axis=1))
        sold_rev += np.where(price > 0, price * sold, 0.0)
    return rev, sold_rev


class _Mechanism:
    """Utility and revenue callbacks for one (mechanism, utility kind) pair."""

    def __init__(self, mechanism: str, kind: str, inst: SmoothnessInstance):
        if mechanism not in ("uniform", "greedy") or kind not in ("approx", "true"):
            raise ParameterError(f"unknown check {mechanism!r}/{kind!r}")
        self.mechanism, self.kind, self.inst = mechanism, kind, inst
        self.k = np.array(inst.k)

    def utility(self, i: int, dev_i, others: list) -> float:
        v, k = self.inst.valuations[i], self.k
        if self.mechanism == "uniform":
            b = np.array(others[:i] + [dev_i] + others[i:])
            if self.kind == "approx":
                return A.uniform_approx_utility(b, v, i, k).value
            return U.expected_utility(b, v, i, k)
        bids = others[:i] + [dev_i] + others[i:]
        if self.kind == "approx":
            return A.greedy_approx_utility(bids, v, i, k).value
        out = G.run_greedy(bids, k, check=False)
        return G.greedy_utility(out, bids, v, i)

    def revenue(self, profile) -> float:
        if self.mechanism == "uniform":
            rev, _ = _uniform_revenue(np.asarray(profile)[None], self.k)
            return float(rev[0])
        return G.run_greedy(list(profile), self.k, check=False).revenue


def _greedy_profile(inst, marg_combo):
    return [GreedyBid(v.goods, mg) for v, mg in zip(inst.valuations, marg_combo)]


def check_smoothness(mechanism: str, kind: str, lam: float, mu: float, inst: SmoothnessInstance,
                     source: Grid | RandomProfiles = Grid(), deviation=None,
                     tolerance: float = TOLERANCE) -> SmoothnessReport:
    """Minimum smoothness slack over a bid grid or a random profile battery.

    ``deviation`` defaults to the optimum-based bids (uniform) or truthful
    concave-hull bids (greedy).
    """
    mech = _Mechanism(mechanism, kind, inst)
    n = inst.n
    opt = optimal_welfare(inst.valuations, inst.k)
    flags: list = []
    if deviation is None:
        if mechanism == "uniform":
            deviation = list(uniform_deviation(inst.valuations, opt, inst.r, inst.B))
        else:
            deviation, flagged = greedy_truthful_deviation(inst.valuations, inst.B)
            flags += [f"concavified curve for player {i}" for i in flagged]
    if isinstance(source, Grid):
        slack, witness, count, identity = _grid_slack(mech, deviation, lam, mu, opt.value, source)
    else:
        slack, witness, count, identity = _random_slack(mech, deviation, lam, mu, opt.value, source)
    min_slack = float(slack.min()) if slack.size else 0.0
    scale = lam * opt.value
    eps = max(0.0, -min_slack) / scale if scale > 0 else (0.0 if min_slack >= -tolerance else math.inf)
    return SmoothnessReport(lam, mu, count, min_slack, witness, eps, opt.value,
                            int((slack < -tolerance).sum()), identity, flags)


def _grid_slack(mech, dev, lam, mu, opt_value, source):
    inst = mech.inst
    n = inst.n
    levels = _levels(inst.B, source.step)
    if mech.mechanism == "uniform":
        grid = list(bid_grid_uniform(inst.m, inst.r, levels))
    else:
        grid = bid_grid_marginals(inst.r, levels)
    g = len(grid)
    total = np.zeros((g,) * n)
    for i in range(n):
        table = np.empty((g,) * (n - 1)) if n > 1 else np.empty(())
        for idx in itertools.product(range(g), repeat=n - 1):
            if mech.mechanism == "uniform":
                others = [grid[a] for a in idx]
            else:
                others = [GreedyBid(inst.valuations[p].goods, grid[a])
                          for p, a in zip([q for q in range(n) if q != i], idx)]
            table[idx] = mech.utility(i, dev[i], others)
        total = total + (np.expand_dims(table, axis=i) if n > 1 else table)
    if mech.mechanism == "uniform":
        garr = np.array(grid)
        idx = np.indices((g,) * n).reshape(n, -1).T
        profiles = garr[idx]  # (P, n, m, r)
        rev, sold = _uniform_revenue(profiles, mech.k)
        identity = bool(np.allclose(rev, sold, atol=1e-12))
        rev = rev.reshape((g,) * n)
    else:
        rev = np.empty((g,) * n)
        for idx in itertools.product(range(g), repeat=n):
            rev[idx] = mech.revenue(_greedy_profile(inst, [grid[a] for a in idx]))
        identity = True
    slack = (total - lam * opt_value + mu * rev).ravel()
    worst = np.unravel_index(int(slack.argmin()), (g,) * n)
    if mech.mechanism == "uniform":
        witness = np.array([grid[a] for a in worst])
    else:
        witness = _greedy_profile(inst, [grid[a] for a in worst])
    return slack, witness, slack.size, identity


def _random_profile(mech, gen):
    inst = mech.inst
    if mech.mechanism == "uniform":
        b = gen.uniform(0, inst.B, size=(inst.n, inst.m, inst.r))
        return -np.sort(-b, axis=2)
    return [GreedyBid(v.goods, tuple(-np.sort(-gen.uniform(0, inst.B, size=inst.r)))) for v in inst.valuations]


def _random_slack(mech, dev, lam, mu, opt_value, source):
    gen = as_generator(source.rng)
    n = mech.inst.n
    slack = np.empty(source.count)
    worst, identity = None, True
    for t in range(source.count):
        prof = _random_profile(mech, gen)
        rows = list(prof)
        lhs = sum(mech.utility(i, dev[i], rows[:i] + rows[i + 1:]) for i in range(n))
        rev = mech.revenue(prof)
        if mech.mechanism == "uniform":
            out = U.run_simultaneous(prof, mech.k, orders=[np.arange(n)] * mech.inst.m, check=False)
            identity &= abs(out.revenue - rev) <= 1e-9
        slack[t] = lhs - lam * opt_value + mu * rev
        if worst is None or slack[t] <= slack[:t].min(initial=math.inf):
            worst = prof
    return slack, worst, source.count, identity


def recompute_slack(report: SmoothnessReport, mechanism: str, kind: str, inst: SmoothnessInstance,
                    deviation=None) -> float:
    """Slack at the stored witness, computed from scratch."""
    mech = _Mechanism(mechanism, kind, inst)
    opt = optimal_welfare(inst.valuations, inst.k)
    if deviation is None:
        deviation = (list(uniform_deviation(inst.valuations, opt, inst.r, inst.B)) if mechanism == "uniform"
                     else greedy_truthful_deviation(inst.valuations, inst.B)[0])
    rows = list(report.witness)
    lhs = sum(mech.utility(i, deviation[i], rows[:i] + rows[i + 1:]) for i in range(inst.n))
    return lhs - report.lam * opt.value + report.mu * mech.revenue(report.witness)


# ---------------------------------------------------------------------------
# instance batteries


def _quarter(gen, size):
    return gen.integers(0, 5, size=size) / 4.0


def _random_valuation(gen, m: int, r: int, B: float) -> Valuation:
    """Additive, unit-demand or complementary valuation on the B/4 grid with v <= B."""
    kind = int(gen.integers(0, 3 if m > 1 else 2))
    if kind == 1:
        return UnitDemand(tuple(_quarter(gen, m) * B))
    if kind == 2:
        # worth something only with a unit of every good; more with two of each
        lo, hi = np.sort(_quarter(gen, 2) * B)
        table = {x: (0.0, lo, hi)[min(min(x), 2)] for x in itertools.product(range(r + 1), repeat=m)}
        return CappedCombinatorial.from_table(table, m, r)
    while True:
        steps = gen.integers(0, 5, size=(m, r))
        if steps.sum() <= 4:
            return AdditiveMarginal(tuple(map(tuple, -np.sort(-steps, axis=1) * B / 4)))


UNIFORM_SHAPES = [
    # (n, m, r, supplies)
    (1, 1, 1, [(1,), (2,)]),
    (2, 1, 1, [(1,), (2,), (3,)]),
    (3, 1, 1, [(1,), (2,), (3,)]),
    (4, 1, 1, [(1,), (2,), (3,)]),
    (2, 1, 2, [(1,), (2,), (3,)]),
    (3, 1, 2, [(1,), (2,), (3,)]),
    (4, 1, 2, [(1,), (2,), (3,)]),
    (2, 2, 1, [(1, 1), (2, 1), (3, 3)]),
    (3, 2, 1, [(1, 1), (1, 2), (3, 2)]),
    (4, 2, 1, [(2, 1)]),
    (2, 2, 2, [(1, 1), (2, 3), (3, 3)]),
]


def uniform_battery(seed: int = 0, B: float = 1.0, shapes=UNIFORM_SHAPES) -> list[SmoothnessInstance]:
    """Seeded instances with n <= 4, m <= 2, k_j <= 3, r <= 2 and values on the B/4 grid."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    out = []
    for n, m, r, supplies in shapes:
        for k in supplies:
            vals = [_random_valuation(gen, m, r, B) for _ in range(n)]
            out.append(SmoothnessInstance(vals, k, r, B, f"n{n}-m{m}-r{r}-k{'.'.join(map(str, k))}"))
    return out


def gap_instance() -> SmoothnessInstance:
    """The greedy demand-uncertainty example with three pair bidders (d = 2)."""
    vals = [SingleMinded((1,), (0, 2.0), 2), SingleMinded((0,), (0, 0.5), 2), SingleMinded((0,), (0, 0.25), 2)]
    vals += [SingleMinded((0, 1), (0, 1.0), 2)] * 3
    return SmoothnessInstance(vals, (3, 3), 1, 2.0, "gap-example")


GREEDY_SHAPES = [
    # (n, m, r, max set size, supplies)
    (3, 2, 1, 2, [(1, 1), (2, 1)]),
    (4, 3, 1, 3, [(1, 1, 1), (2, 1, 2)]),
    (5, 3, 1, 3, [(1, 2, 1), (2, 2, 2)]),
    (2, 2, 2, 2, [(1, 2), (3, 3)]),
    (3, 3, 2, 3, [(2, 1, 2), (3, 3, 3)]),
]


def greedy_battery(seed: int = 0, B: float = 1.0, shapes=GREEDY_SHAPES) -> list[SmoothnessInstance]:
    """Seeded single-minded instances with n <= 5 and interest sets of size <= 3."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 1])))
    out = []
    for n, m, r, d, supplies in shapes:
        for k in supplies:
            vals = []
            for _ in range(n):
                size = int(gen.integers(1, min(d, m) + 1))
                goods = tuple(sorted(gen.choice(m, size=size, replace=False).tolist()))
                steps = -np.sort(-_quarter(gen, r)) * B
                vals.append(SingleMinded(goods, (0.0, *np.cumsum(steps)), m))
            out.append(SmoothnessInstance(vals, k, r, B, f"n{n}-m{m}-r{r}-d{d}-k{'.'.join(map(str, k))}"))
    return out


def max_set_size(inst: SmoothnessInstance) -> int:
    return max(len(v.goods) for v in inst.valuations)


# ---------------------------------------------------------------------------
# noisy-arrival smoothness with the random proxy deviation


def noisy_proxy_smoothness(v: Sequence[Valuation], b, cfg: MarketConfig, draws: int,
                           rng: RngLike) -> tuple[Estimate, Estimate]:
    """Monte Carlo estimates of sum_i E[z_i U_i(dev_i, b_-i . z)] and
    E[OPT(v . z)] - E[R(b . z)] on independent draws."""
    gen = as_generator(rng)
    b = U._as_profile(b)
    n = len(v)
    k = np.array(cfg.supply.k)
    dev = random_proxy_deviation(v, cfg, gen)
    lhs = np.zeros(draws)
    rhs = np.zeros(draws)
    for t in range(draws):
        z = sample_arrival(cfg.delta, n, gen).astype(bool)
        for i in np.flatnonzero(z):
            prof = b.copy()
            prof[i] = dev(int(i))
            lhs[t] += A.uniform_approx_utility(prof, v[i], int(i), k, active=z).value
        z2 = sample_arrival(cfg.delta, n, gen).astype(bool)
        opt = optimal_welfare([v[p] for p in np.flatnonzero(z2)], k).value
        rev, _ = _uniform_revenue(b[z][None], k) if z.any() else (np.zeros(1), None)
        rhs[t] = opt - float(rev[0])
    return Estimate.from_samples(lhs), Estimate.from_samples(rhs)


# ---------------------------------------------------------------------------
# rate thresholds


@dataclass(frozen=True)
class RateInputs:
    epsilon: float
    delta: float
    m: int = 1
    B: float = 1.0
    H: float = 1.0
    r: int = 1
    rho: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ParameterError("delta must lie in (0, 1)")
        if min(self.epsilon, self.m, self.B, self.H, self.r, self.rho) <= 0:
            raise ParameterError("rate inputs must be positive")


def _ceil(x: float) -> int:
    # guard against 57600.000000000007 style rounding
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


def required_supply_r1(p: RateInputs) -> int:
    """ceil(36 rho^2 m^2 (B+H)^2 / (eps^2 delta (1-delta)))."""
    x = 36 * p.rho**2 * p.m**2 * (p.B + p.H) ** 2 / (p.epsilon**2 * p.delta * (1 - p.delta))
    return _ceil(x)


def required_supply_general(p: RateInputs) -> int:
    """ceil(16 m^2 (B+H)^2 r^8 rho^2 / (eps^2 delta (1-delta)) + r)."""
    x = 16 * p.m**2 * (p.B + p.H) ** 2 * p.r**8 * p.rho**2 / (p.epsilon**2 * p.delta * (1 - p.delta)) + p.r
    return _ceil(x)


def binomial_pmf_bound(t: int, p: float) -> float:
    if t < 1 or not 0.0 < p < 1.0:
        raise ParameterError("need t >= 1 and p in (0, 1)")
    return 2.0 / math.sqrt(t * p * (1 - p))


def max_binomial_pmf(t: int, p: float) -> float:
    return float(binom.pmf(np.arange(t + 1), t, p).max())


def binomial_bound_violations(ts, ps) -> list[tuple[int, float, float, float]]:
    """(t, p, exact max pmf, bound) wherever the bound fails."""
    out = []
    for t in ts:
        for p in ps:
            exact, bound = max_binomial_pmf(int(t), float(p)), binomial_pmf_bound(int(t), float(p))
            if exact > bound:
                out.append((int(t), float(p), exact, bound))
    return out


def tail_threshold(epsilon: float, delta: float, r: int = 1) -> int:
    """Smallest integer q exceeding 4 r^2 / (eps^2 delta (1-delta))."""
    return math.floor(4 * r**2 / (epsilon**2 * delta * (1 - delta)) + 1e-9) + 1


# ---------------------------------------------------------------------------
# empirical tail estimators


def _counts_above(b, x: float) -> np.ndarray:
    b = U._as_profile(b)
    return (b > x).sum(axis=(1, 2))


def arrival_count_samples(b, x: float, delta: float, trials: int, rng: RngLike) -> np.ndarray:
    """Draws of B(b . z; x), the number of arriving marginal bids strictly above x."""
    c = _counts_above(b, x)
    gen = as_generator(rng)
    values, sizes = np.unique(c, return_counts=True)
    total = np.zeros(trials, dtype=np.int64)
    for val, size in zip(values, sizes):
        if val > 0:
            total += val * gen.binomial(int(size), 1.0 - delta, size=trials)
    return total


def tail_estimator(b, x: float, delta: float, trials: int, rng: RngLike) -> dict[int, Estimate]:
    """Empirical Pr[B(b . z; x) = q] for every observed q."""
    if trials < 2:
        raise ParameterError("need at least two trials")
    draws = arrival_count_samples(b, x, delta, trials, rng)
    qs, freq = np.unique(draws, return_counts=True)
    out = {}
    for q, f in zip(qs.tolist(), freq.tolist()):
        p = f / trials
        out[int(q)] = Estimate(p, math.sqrt(p * (1 - p) / trials), trials)
    return out


def tail_check(b, x: float, delta: float, epsilon: float, r: int, trials: int,
               rng: RngLike) -> tuple[bool, int, Estimate]:
    """Check Pr[B = q] <= eps + 3 stderr for all q above the lemma threshold.

    Returns (ok, q of the largest estimate, that estimate).
    """
    q0 = tail_threshold(epsilon, delta, r)
    pmf = tail_estimator(b, x, delta, trials, rng)
    above = {q: e for q, e in pmf.items() if q >= q0}
    if not above:
        return True, q0, Estimate(0.0, 0.0, trials)
    q, e = max(above.items(), key=lambda kv: kv[1].mean)
    ok = all(e.mean <= epsilon + 3 * e.stderr for e in above.values())
    return ok, q, e


def point_probability(b, x: float, q: int, delta: float, trials: int, rng: RngLike) -> Estimate:
    draws = arrival_count_samples(b, x, delta, trials, rng)
    hit = (draws == q).astype(float)
    return Estimate.from_samples(hit)


def pmf_bound_for_profile(b, x: float, delta: float) -> float:
    """Upper bound on max_q Pr[B(b . z; x) = q].

    Group bidders by how many of their bids exceed x; conditional on all
    other groups, the largest group contributes a scaled Binomial(N, 1 - delta),
    whose point masses are at most 2 / sqrt(N delta (1 - delta)).
    """
    c = _counts_above(b, x)
    c = c[c > 0]
    if c.size == 0:
        return 1.0
    _, sizes = np.unique(c, return_counts=True)
    return min(1.0, binomial_pmf_bound(int(sizes.max()), 1.0 - delta))


def cdf_gap_check(b, x_values, t: int, r: int, delta: float, trials: int,
                  rng: RngLike) -> tuple[float, float]:
    """Largest excess of |F_t(x) - F_{t+r}(x)| over r times the point-mass bound.

    F_s(x) = Pr[s-th highest arriving bid <= x] = Pr[B(b . z; x) < s].
    Returns (worst excess, Monte Carlo allowance); the lemma holds
    empirically when the excess is at most the allowance.
    """
    b = U._as_profile(b)
    gen = as_generator(rng)
    z = (gen.random((trials, b.shape[0])) >= delta).astype(np.int64)
    worst = -math.inf
    for x in x_values:
        cnt = z @ _counts_above(b, float(x))
        gap = abs(float(np.mean(cnt < t)) - float(np.mean(cnt < t + r)))
        worst = max(worst, gap - r * pmf_bound_for_profile(b, float(x), delta))
    return worst, 3 * math.sqrt(0.25 / trials)
