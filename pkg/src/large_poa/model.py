"""Shared domain types: market configuration, valuations, bids, seeded streams."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, Union

import numpy as np


class ModelError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ModelError):
    pass


class ParameterError(ModelError):
    pass


class CapacityError(ModelError):
    """An exact computation would exceed its enumeration budget."""


class ValidationError(ModelError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


# ---------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream id) pair naming a reproducible counter-based stream.

    Every call to :meth:`generator` returns a fresh generator positioned at
    the start of the stream, so two operations handed the same stream see the
    same draws.  Use :meth:`child` to derive independent substreams.
    """

    seed: int
    stream: tuple[int, ...] = (0,)

    def __post_init__(self):
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream + (int(index),))


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None:
        return RngStream(0).generator()
    return RngStream(int(rng)).generator()


@dataclass(frozen=True)
class Estimate:
    """A point estimate with its standard error (0 for exact values)."""

    mean: float
    stderr: float = 0.0
    samples: int = 0

    @classmethod
    def from_samples(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        if x.size < 2:
            return cls(float(x.mean()) if x.size else 0.0, math.inf, int(x.size))
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value), 0.0, 0)

    def within(self, target: float, rel: float = 0.0, abs_: float = 0.0, sigmas: float = 0.0) -> bool:
        tol = max(rel * abs(target), abs_) + sigmas * self.stderr
        return abs(self.mean - target) <= tol


# ---------------------------------------------------------------------------
# supply


@dataclass(frozen=True)
class FixedSupply:
    k: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        if any(x < 1 for x in self.k):
            raise ParameterError(f"fixed supply must be >= 1 per good, got {self.k}")

    @property
    def m(self) -> int:
        return len(self.k)

    def support(self) -> list[tuple[tuple[int, ...], float]]:
        return [(self.k, 1.0)]


@dataclass(frozen=True)
class UniformIntegerSupply:
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(x) for x in self.lo))
        object.__setattr__(self, "hi", tuple(int(x) for x in self.hi))
        if len(self.lo) != len(self.hi):
            raise DimensionError("lo and hi must have the same length")
        for a, b in zip(self.lo, self.hi):
            if not 0 <= a <= b:
                raise ParameterError(f"need 0 <= lo <= hi, got [{a}, {b}]")

    @property
    def m(self) -> int:
        return len(self.lo)

    def support_size(self) -> int:
        return math.prod(b - a + 1 for a, b in zip(self.lo, self.hi))

    def support(self) -> list[tuple[tuple[int, ...], float]]:
        p = 1.0 / self.support_size()
        ranges = [range(a, b + 1) for a, b in zip(self.lo, self.hi)]
        return [(tuple(k), p) for k in itertools.product(*ranges)]


SupplyModel = Union[FixedSupply, UniformIntegerSupply]


def sample_supply(model: SupplyModel, rng: RngLike) -> np.ndarray:
    if isinstance(model, FixedSupply):
        return np.array(model.k, dtype=int)
    gen = as_generator(rng)
    return gen.integers(np.array(model.lo), np.array(model.hi) + 1)


def sample_supply_batch(model: SupplyModel, count: int, rng: RngLike,
                        stratified: bool = False) -> np.ndarray:
    """``count`` supply vectors, shape (count, m).

    With ``stratified`` the draws come from a scrambled strength-2 orthogonal
    array Latin hypercube (``count`` is rounded up to p**2 for a prime p), which
    keeps each draw marginally uniform but balances pairs of goods.
    """
    if isinstance(model, FixedSupply):
        return np.tile(np.array(model.k, dtype=int), (count, 1))
    gen = as_generator(rng)
    lo, hi = np.array(model.lo), np.array(model.hi)
    if not stratified:
        return gen.integers(lo, hi + 1, size=(count, model.m))
    from scipy.stats import qmc

    p = _next_prime(max(2, math.isqrt(max(count - 1, 0)) + 1), at_least=model.m - 1)
    u = qmc.LatinHypercube(d=model.m, strength=2, seed=gen).random(p * p)
    width = hi - lo + 1
    return lo + np.minimum(np.floor(u * width).astype(int), width - 1)


def _next_prime(x: int, at_least: int = 0) -> int:
    x = max(x, at_least, 2)
    while any(x % d == 0 for d in range(2, math.isqrt(x) + 1)):
        x += 1
    return x


# ---------------------------------------------------------------------------
# valuations
#
# Goods are indexed 0..m-1.  Every valuation evaluates a clamped allocation
# vector, so v(x) == v(min(x, r)) holds by construction.


@dataclass(frozen=True)
class UnitDemand:
    """Value ``values[j]`` for one unit of good j; at most one unit is useful."""

    values: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.values)

    r = 1

    def value(self, x: np.ndarray) -> float:
        got = [v for v, c in zip(self.values, x) if c >= 1]
        return float(max(got)) if got else 0.0


@dataclass(frozen=True)
class SingleMinded:
    """Multi-unit single-minded: ``curve[l]`` is the value of l copies of ``goods``."""

    goods: tuple[int, ...]
    curve: tuple[float, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "goods", tuple(sorted(set(int(j) for j in self.goods))))
        object.__setattr__(self, "curve", tuple(float(c) for c in self.curve))
        if not self.goods or any(not 0 <= j < self.m for j in self.goods):
            raise ParameterError(f"interest set {self.goods} invalid for m={self.m}")
        if self.curve[0] != 0.0:
            raise ParameterError("curve(0) must be 0")
        if any(b < a for a, b in zip(self.curve, self.curve[1:])):
            raise ParameterError("curve must be nondecreasing")

    @property
    def r(self) -> int:
        return len(self.curve) - 1

    def copies(self, x) -> int:
        return int(min(min(int(x[j]) for j in self.goods), self.r))

    def value(self, x: np.ndarray) -> float:
        return self.curve[self.copies(x)]


@dataclass(frozen=True)
class AdditiveMarginal:
    """Additive across goods with per-good non-increasing marginal values."""

    marginals: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "marginals",
                           tuple(tuple(float(a) for a in row) for row in self.marginals))
        if len({len(row) for row in self.marginals}) != 1:
            raise DimensionError("every good needs the same number of marginals")
        for row in self.marginals:
            if any(b > a for a, b in zip(row, row[1:])) or any(a < 0 for a in row):
                raise ParameterError("marginal values must be nonnegative and non-increasing")

    @property
    def m(self) -> int:
        return len(self.marginals)

    @property
    def r(self) -> int:
        return len(self.marginals[0])

    def value(self, x: np.ndarray) -> float:
        return float(sum(sum(row[: int(c)]) for row, c in zip(self.marginals, x)))


@dataclass(frozen=True)
class CappedCombinatorial:
    """Arbitrary oracle over clamped allocation vectors in {0..r}^m."""

    oracle: Callable[[tuple[int, ...]], float] = field(compare=False)
    m: int = 1
    r: int = 1

    def value(self, x: np.ndarray) -> float:
        return float(self.oracle(tuple(int(c) for c in x)))

    @classmethod
    def from_table(cls, table: dict, m: int, r: int) -> "CappedCombinatorial":
        return cls(oracle=lambda x: table.get(tuple(x), 0.0), m=m, r=r)


Valuation = Union[UnitDemand, SingleMinded, AdditiveMarginal, CappedCombinatorial]


def eval_valuation(v: Valuation, x) -> float:
    x = np.asarray(x, dtype=int)
    if x.ndim != 1 or x.shape[0] != v.m:
        raise DimensionError(f"allocation of length {x.shape} for a valuation over {v.m} goods")
    if np.any(x < 0):
        raise ParameterError("allocations must be nonnegative")
    if not x.any():
        return 0.0
    return v.value(np.minimum(x, v.r))


def check_valuation(v: Valuation, H: float, rho: float) -> list[str]:
    """Range violations of ``v`` over all of {0..r}^m (empty list if valid)."""
    problems = []
    for x in itertools.product(range(v.r + 1), repeat=v.m):
        val = eval_valuation(v, x)
        if not any(x):
            if val != 0.0:
                problems.append(f"v{x} = {val} but the empty bundle must be worth 0")
            continue
        if val > H:
            problems.append(f"v{x} = {val} exceeds H = {H}")
        if val < rho:
            problems.append(f"v{x} = {val} below rho = {rho}")
    return problems


# ---------------------------------------------------------------------------
# market configuration and bids


@dataclass(frozen=True)
class MarketConfig:
    n: int
    m: int
    supply: SupplyModel
    delta: float = 0.0
    r: int = 1
    B: float = 1.0
    H: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.r < 1:
            raise ParameterError("need n, m, r >= 1")
        if not 0.0 <= self.delta < 1.0:
            raise ParameterError(f"delta must lie in [0, 1), got {self.delta}")
        if not 0.0 < self.rho <= self.H:
            raise ParameterError(f"need 0 < rho <= H, got rho={self.rho}, H={self.H}")
        if self.B < 0:
            raise ParameterError("B must be nonnegative")
        if self.supply.m != self.m:
            raise DimensionError(f"supply model covers {self.supply.m} goods, market has {self.m}")


@dataclass(frozen=True)
class GreedyBid:
    """A bid in the greedy auction: a set of goods and marginal bids per copy."""

    goods: tuple[int, ...]
    marginals: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "goods", tuple(sorted(set(int(j) for j in self.goods))))
        object.__setattr__(self, "marginals", tuple(float(b) for b in self.marginals))


@dataclass(frozen=True)
class Violation:
    kind: str  # "monotonicity" | "range" | "shape"
    player: int
    good: int | None
    index: int  # 1-based marginal index

    def __str__(self):
        where = f"player {self.player}" + (f", good {self.good}" if self.good is not None else "")
        return f"{self.kind} violation at index {self.index} ({where})"


def _check_sequence(seq, B, player, good, out):
    prev = math.inf
    for idx, b in enumerate(seq, start=1):
        if b > prev:
            out.append(Violation("monotonicity", player, good, idx))
        if not 0.0 <= b <= B:
            out.append(Violation("range", player, good, idx))
        prev = b


def validate_bid_profile(b, cfg: MarketConfig | None = None, B: float | None = None) -> list[Violation]:
    """Every violated bid invariant.  An empty list means the profile is valid.

    ``b`` is either an (n, m, r) array (uniform price form), a single marginal
    sequence, or a list of :class:`GreedyBid`.
    """
    cap = B if B is not None else (cfg.B if cfg is not None else math.inf)
    out: list[Violation] = []
    if isinstance(b, (list, tuple)) and b and isinstance(b[0], GreedyBid):
        for i, bid in enumerate(b):
            if cfg is not None and any(not 0 <= j < cfg.m for j in bid.goods):
                out.append(Violation("shape", i, None, 0))
            _check_sequence(bid.marginals, cap, i, None, out)
        return out
    arr = np.asarray(b, dtype=float)
    if arr.ndim == 1:
        _check_sequence(arr, cap, 0, None, out)
        return out
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if cfg is not None and arr.shape[1:] != (cfg.m, cfg.r):
        out.append(Violation("shape", -1, None, 0))
        return out
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            _check_sequence(arr[i, j], cap, i, j, out)
    return out


def sample_arrival(delta: float, n: int, rng: RngLike) -> np.ndarray:
    if not 0.0 <= delta < 1.0:
        raise ParameterError(f"delta must lie in [0, 1), got {delta}")
    if delta == 0.0:
        return np.ones(n, dtype=int)
    return (as_generator(rng).random(n) >= delta).astype(int)


# ---------------------------------------------------------------------------
# exact enumeration of arrivals


def _record_key(rec):
    if isinstance(rec, GreedyBid):
        return ("g", rec.goods, rec.marginals)
    return ("u", np.asarray(rec, dtype=float).tobytes())


def arrival_configurations(records: Sequence, i: int, delta: float,
                           max_configs: int = 1 << 20) -> Iterator[tuple[np.ndarray, float]]:
    """Exact distribution of who arrives, given that player ``i`` arrives.

    Players other than ``i`` with identical bid records are exchangeable, so the
    enumeration runs over how many of each group arrive (binomial weights)
    rather than over all subsets.  Yields (active mask, probability); the
    probabilities sum to one.
    """
    from scipy.stats import binom

    n = len(records)
    if delta == 0.0:
        yield np.ones(n, dtype=bool), 1.0
        return
    groups: dict = {}
    for p in range(n):
        if p != i:
            groups.setdefault(_record_key(records[p]), []).append(p)
    members = list(groups.values())
    total = math.prod(len(g) + 1 for g in members)
    if total > max_configs:
        raise CapacityError(f"{total} arrival configurations exceed the budget of {max_configs}")
    pmfs = [binom.pmf(np.arange(len(g) + 1), len(g), 1.0 - delta) for g in members]
    for counts in itertools.product(*[range(len(g) + 1) for g in members]):
        prob = 1.0
        active = np.zeros(n, dtype=bool)
        active[i] = True
        for g, c, pmf in zip(members, counts, pmfs):
            prob *= pmf[c]
            active[g[:c]] = True
        if prob > 0.0:
            yield active, prob
