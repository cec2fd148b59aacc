"""Equilibrium verification, no-regret dynamics and price-of-anarchy estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import uniform as U
from .model import (
    AdditiveMarginal, CapacityError, Estimate, ModelError, ParameterError, RngLike, SupplyModel,
    UniformIntegerSupply, UnitDemand, Valuation, arrival_configurations, as_generator,
    eval_valuation, sample_supply_batch,
)
from .welfare import closed_form_supply_example_opt


class DegenerateRatio(ModelError):
    """A welfare estimate in a ratio denominator is not positive."""


# ---------------------------------------------------------------------------
# price of anarchy


def estimate_poa(opt: Estimate, welfare: Estimate, cov: float = 0.0) -> Estimate:
    """opt / welfare with first-order (delta method) error propagation."""
    if welfare.mean <= 0:
        raise DegenerateRatio(f"welfare estimate {welfare.mean} is not positive")
    ratio = opt.mean / welfare.mean
    rel = (opt.stderr / opt.mean) ** 2 if opt.mean else 0.0
    rel += (welfare.stderr / welfare.mean) ** 2
    if opt.mean:
        rel -= 2 * cov / (opt.mean * welfare.mean)
    return Estimate(ratio, abs(ratio) * math.sqrt(max(rel, 0.0)), max(opt.samples, welfare.samples))


def paired_poa(opt_samples, welfare_samples) -> Estimate:
    """Ratio of means on paired draws, with the covariance in the error."""
    o = np.asarray(opt_samples, dtype=float)
    w = np.asarray(welfare_samples, dtype=float)
    n = o.size
    cov = float(np.cov(o, w, ddof=1)[0, 1]) / n if n > 1 else 0.0
    return estimate_poa(Estimate.from_samples(o), Estimate.from_samples(w), cov)


# ---------------------------------------------------------------------------
# games and equilibrium checks


class UniformGame:
    """Simultaneous uniform price auction with point-mass types.

    Utilities are averaged exactly over tie orders and over arrivals
    (players absent with probability ``delta``) and over the supply support.
    """

    def __init__(self, valuations: Sequence[Valuation], supply: SupplyModel, delta: float = 0.0,
                 r: int = 1):
        self.valuations = list(valuations)
        self.supply = supply
        self.delta = delta
        self.r = r
        self.n = len(self.valuations)
        self._support = supply.support()
        self._cache: dict = {}

    def utility(self, i: int, profile) -> float:
        b = U._as_profile(profile)
        key = (i, b.tobytes())
        if key in self._cache:
            return self._cache[key]
        if self.n > U.EXACT_MAX_PLAYERS and self.delta > 0:
            raise CapacityError(f"exact arrival enumeration supports n <= {U.EXACT_MAX_PLAYERS}")
        total = 0.0
        for active, pa in arrival_configurations(list(b), i, self.delta):
            for k, pk in self._support:
                total += pa * pk * U.expected_utility(b, self.valuations[i], i, np.array(k), active)
        val = (1.0 - self.delta) * total
        self._cache[key] = val
        return val

    def welfare(self, profile) -> float:
        """Expected welfare (utilities plus revenue) at a profile."""
        b = U._as_profile(profile)
        total = sum(self.utility(i, b) for i in range(self.n))
        return total + self.revenue(b)

    def revenue(self, profile) -> float:
        b = U._as_profile(profile)
        n, m, _ = b.shape
        if self.delta == 0:
            arrivals = [(np.ones(n, dtype=bool), 1.0)]
        else:
            if n > U.EXACT_MAX_PLAYERS:
                raise CapacityError(f"exact arrival enumeration supports n <= {U.EXACT_MAX_PLAYERS}")
            arrivals = [(np.array(z, dtype=bool), float(np.prod(np.where(z, 1 - self.delta, self.delta))))
                        for z in np.ndindex(*(2,) * n)]
        rev = 0.0
        for z, pz in arrivals:
            for k, pk in self._support:
                for j in range(m):
                    live = b[z, j, :]
                    price = U.kth_highest(live, int(k[j]) + 1)
                    rev += pz * pk * int(k[j]) * price
        return rev


@dataclass
class EquilibriumReport:
    profile: object
    max_regret: float
    regret_stderr: float = 0.0
    welfare: Estimate = Estimate(0.0)
    opt: Estimate = Estimate(0.0)
    poa: Estimate | None = None
    argmax: tuple | None = None  # (player, deviation) achieving max regret
    extras: dict = field(default_factory=dict)

    def is_equilibrium(self, tolerance: float = 1e-9, sigmas: float = 3.0) -> bool:
        return self.max_regret <= tolerance + sigmas * self.regret_stderr


def verify_candidate_equilibrium(utility: Callable, profile: Sequence, deviation_grid,
                                 players: Sequence[int] | None = None) -> EquilibriumReport:
    """Largest unilateral gain over a finite deviation grid.

    ``utility(i, profile)`` returns a float or an :class:`Estimate`;
    ``deviation_grid`` is one list of strategies shared by all players or a
    per-player mapping.  ``players`` restricts the check to representatives
    (for populations of identical players).
    """
    profile = list(profile)
    players = range(len(profile)) if players is None else players
    best, best_se, arg = -math.inf, 0.0, None

    def val(x):
        return (x.mean, x.stderr) if isinstance(x, Estimate) else (float(x), 0.0)

    for i in players:
        grid = deviation_grid[i] if isinstance(deviation_grid, dict) else deviation_grid
        base, se0 = val(utility(i, profile))
        for d in grid:
            trial = profile.copy()
            trial[i] = d
            u, se = val(utility(i, trial))
            if u - base > best:
                best, best_se, arg = u - base, math.hypot(se, se0), (i, d)
    return EquilibriumReport(profile, best, best_se, argmax=arg)


# ---------------------------------------------------------------------------
# the decreasing-marginals example without noise


def example1_draws(k: int, trials: int, rng: RngLike) -> tuple[np.ndarray, np.ndarray]:
    """(first, second) marginal values of shape (trials, k): max and min of two U[2, 3] draws."""
    gen = as_generator(rng)
    a = gen.uniform(2.0, 3.0, size=(trials, k, 2))
    return a.max(axis=2), a.min(axis=2)


def example1_welfare_opt(first: np.ndarray, second: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial equilibrium welfare (every bidder gets its first unit) and optimum (top k of 2k marginals)."""
    welfare = first.sum(axis=1)
    allm = np.concatenate([first, second], axis=1)
    top = np.partition(allm, allm.shape[1] - k, axis=1)[:, allm.shape[1] - k:]
    return welfare, top.sum(axis=1)


def example1_opt_exact(k: int) -> float:
    """Exact expected optimum: expected sum of the top k of 2k U[2, 3] draws.

    The j-th order statistic of 2k uniforms on [0, 1] has mean j / (2k + 1).
    """
    n = 2 * k
    return 2.0 * k + sum(j / (n + 1) for j in range(n - k + 1, n + 1))


def scenario_example1(k: int = 50, trials: int = 100_000, rng: RngLike = None,
                      mechanism_checks: int = 20, deviation_checks: int = 20) -> EquilibriumReport:
    """n = k bidders bid their first marginal truthfully and 0 on the second unit.

    Welfare and optimum are computed for every trial in closed form; a
    subset of trials is also pushed through the auction itself, and for a
    subset of value draws the ex-post deviation argument is checked on a bid
    grid for one bidder.
    """
    if k < 2:
        raise ParameterError("k must be at least 2")
    gen = as_generator(rng)
    first, second = example1_draws(k, trials, gen)
    welfare, opt = example1_welfare_opt(first, second, k)
    bids = np.stack([first, np.zeros_like(first)], axis=2)  # (trials, k, 2)
    mech_ok = True
    for t in range(min(mechanism_checks, trials)):
        out = U.run_simultaneous(bids[t][:, None, :], [k], gen)
        got = float((out.alloc[:, 0] >= 1) @ first[t] + (out.alloc[:, 0] >= 2) @ second[t])
        mech_ok &= abs(got - welfare[t]) <= 1e-9 and out.price[0] == 0.0
    regret = -math.inf
    grid = np.linspace(0.0, 3.0, 13)
    for t in range(min(deviation_checks, trials)):
        base = bids[t]

        def util(i, prof, t=t):
            b = np.asarray(prof)[:, None, :]
            v = AdditiveMarginal(((first[t, i], second[t, i]),))
            return U.expected_utility(b, v, i, [k])

        devs = [np.array([first[t, 0], x]) for x in grid] + [np.array([x, y]) for x in grid for y in grid if y <= x]
        rep = verify_candidate_equilibrium(util, list(base), devs, players=[0])
        regret = max(regret, rep.max_regret)
    w, o = Estimate.from_samples(welfare), Estimate.from_samples(opt)
    report = EquilibriumReport(profile="first marginal truthful, second 0", max_regret=regret,
                               welfare=w, opt=o, poa=paired_poa(opt, welfare))
    report.extras.update(k=k, mechanism_agrees=mech_ok, welfare_per_capita=w.mean / k,
                         opt_per_capita=o.mean / k, opt_exact_per_capita=example1_opt_exact(k) / k)
    return report


# ---------------------------------------------------------------------------
# the supply-uncertainty example


def split_population(t: int, goods: int, split: str, rng: RngLike = None) -> np.ndarray:
    """Number of flexible players bidding on each good."""
    if split == "even":
        base = np.full(goods, t // goods)
        base[: t % goods] += 1
        return base
    if split == "random":
        gen = as_generator(rng)
        return np.bincount(gen.integers(0, goods, size=t), minlength=goods)
    raise ParameterError(f"unknown split {split!r}")


def supply_example_welfare(k: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Equilibrium welfare per supply draw: on each good the flexible bidders
    (bid 1) take min(k_j, c_j) units and price setters (bid 1/2) the rest."""
    return (np.minimum(k, c) + 0.5 * np.maximum(k - c, 0)).sum(axis=-1)


def supply_example_opt(k: np.ndarray, t: int) -> np.ndarray:
    """min(K, t) + (K - t)^+ / 2 for total supply K (price setters never run out)."""
    K = np.asarray(k).sum(axis=-1)
    return np.minimum(K, t) + 0.5 * np.maximum(K - t, 0)


def supply_example_profile(t: int, c: np.ndarray) -> tuple[np.ndarray, list]:
    """Bid profile (n, m, 1) and valuations: price setters per good, then flexible bidders."""
    goods = len(c)
    rows, vals = [], []
    for j in range(goods):
        row = np.zeros((goods, 1))
        row[j, 0] = 0.5
        rows += [row] * t
        vals += [UnitDemand(tuple(0.5 if q == j else 0.0 for q in range(goods)))] * t
    for j in range(goods):
        row = np.zeros((goods, 1))
        row[j, 0] = 1.0
        rows += [row] * int(c[j])
        vals += [UnitDemand((1.0,) * goods)] * int(c[j])
    return np.array(rows), vals


def scenario_supply_counterexample(t: int = 2000, goods: int = 2, trials: int = 10_000,
                                   rng: RngLike = None, split: str = "even",
                                   mechanism_checks: int = 10) -> EquilibriumReport:
    """Flexible bidders each bid 1 on one good; price setters bid 1/2 on theirs.

    Supplies are uniform on {0, ..., 2t/goods} per good, drawn by a strength-2
    orthogonal-array Latin hypercube.  Welfare is evaluated in closed form on
    every draw and through the auction on a subset.
    """
    if t % 2 or goods < 2:
        raise ParameterError("t must be even and goods >= 2")
    hi = 2 * t // goods
    model = UniformIntegerSupply((0,) * goods, (hi,) * goods)
    gen = as_generator(rng)
    k = sample_supply_batch(model, trials, gen, stratified=True)
    c = split_population(t, goods, split, gen)
    welfare = supply_example_welfare(k, c)
    opt = supply_example_opt(k, t)
    mech_ok = True
    if mechanism_checks:
        b, vals = supply_example_profile(t, c)
        for s in range(min(mechanism_checks, len(k))):
            out = U.run_simultaneous(b, k[s], gen, check=False).with_welfare(vals)
            mech_ok &= abs(out.welfare - welfare[s]) <= 1e-9
    w, o = Estimate.from_samples(welfare), Estimate.from_samples(opt)
    report = EquilibriumReport(profile=f"flexible split {c.tolist()}", max_regret=math.nan,
                               welfare=w, opt=o, poa=paired_poa(opt, welfare))
    excess = None
    if goods == 2:
        x, y = k[:, 0] / t, k[:, 1] / t
        excess = Estimate.from_samples(np.maximum(x + y - 1, 0))
        report.extras["closed_form_opt_agrees"] = bool(np.allclose(
            closed_form_supply_example_opt(t, k[:, 0], k[:, 1]), opt))
    report.extras.update(t=t, goods=goods, samples=len(k), mechanism_agrees=mech_ok,
                         welfare_per_t=Estimate(w.mean / t, w.stderr / t, w.samples),
                         opt_per_t=Estimate(o.mean / t, o.stderr / t, o.samples),
                         excess=excess)
    return report


def supply_example_game(t: int) -> tuple[UniformGame, np.ndarray]:
    """Exact small-t game for the two-good example with the even split."""
    c = split_population(t, 2, "even")
    b, vals = supply_example_profile(t, c)
    return UniformGame(vals, UniformIntegerSupply((0, 0), (t, t))), b


def verify_supply_example(t: int = 4, grid=(0.0, 0.5, 1.0)) -> EquilibriumReport:
    """Exact regret of one price setter and one flexible bidder on a 2-good bid grid."""
    game, b = supply_example_game(t)
    devs = [np.array([[x], [y]]) for x in grid for y in grid]
    price_setter, flexible = 0, 2 * t
    rep = verify_candidate_equilibrium(game.utility, list(b), devs, players=[price_setter, flexible])
    rep.extras["flexible_utility"] = game.utility(flexible, b)
    rep.extras["both_goods_utility"] = game.utility(
        flexible, np.concatenate([b[:flexible], [np.array([[1.0], [1.0]])], b[flexible + 1:]]))
    return rep


# ---------------------------------------------------------------------------
# no-regret dynamics


@dataclass
class LearningResult:
    plays: np.ndarray  # (T, n) grid indices of sampled joint play
    regret: np.ndarray  # (n,) average external regret
    bound: float  # Hedge regret bound for the given grid size and range
    weights: np.ndarray  # final mixed strategies (n, grid size)

    def empirical_welfare(self, welfare: Callable[[tuple], float]) -> Estimate:
        vals = [welfare(tuple(row)) for row in self.plays]
        return Estimate.from_samples(vals)


def regret_learning(utility: Callable[[int, tuple], float], n: int, grid_size: int, rounds: int,
                    u_range: float, rng: RngLike, eta: float | None = None,
                    budget: int = 10**7) -> LearningResult:
    """Hedge for every player on full-information feedback.

    Each round every player samples an action from its weights; each then
    observes the utility of every one of its actions against the others'
    sampled actions.  ``utility(i, actions)`` takes a tuple of grid indices.
    Regret is measured against the expected utility of the player's mixed
    strategy each round.
    """
    if rounds < 1 or grid_size < 1:
        raise ParameterError("rounds and grid size must be positive")
    if n * grid_size * rounds > budget:
        raise CapacityError(f"{n * grid_size * rounds} utility evaluations exceed {budget}")
    gen = as_generator(rng)
    u_range = max(u_range, 1e-12)
    eta = math.sqrt(8 * math.log(max(grid_size, 2)) / rounds) / u_range if eta is None else eta
    logw = np.zeros((n, grid_size))
    cum_action = np.zeros((n, grid_size))
    cum_mixed = np.zeros(n)
    plays = np.zeros((rounds, n), dtype=int)
    for t in range(rounds):
        p = np.exp(logw - logw.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        acts = np.array([gen.choice(grid_size, p=p[i]) for i in range(n)])
        plays[t] = acts
        for i in range(n):
            row = np.empty(grid_size)
            trial = acts.copy()
            for a in range(grid_size):
                trial[i] = a
                row[a] = utility(i, tuple(trial))
            cum_action[i] += row
            cum_mixed[i] += p[i] @ row
            logw[i] += eta * row
    p = np.exp(logw - logw.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    regret = (cum_action.max(axis=1) - cum_mixed) / rounds
    bound = u_range * math.sqrt(2 * math.log(max(grid_size, 2)) / rounds)
    return LearningResult(plays, regret, bound, p)


def cce_welfare_bound(opt: float, lam: float, mu: float, n: int, gap: float, regret: float) -> float:
    """lambda OPT / max(1, mu) - n (gap + regret): the smoothness floor for CCE welfare."""
    return lam * opt / max(1.0, mu) - n * (gap + regret)
