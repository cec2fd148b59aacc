"""Atomic congestion games where each of n players carries flow 1/n.

Player i's cost on profile s is sum_{e in s_i} c_e(n_e(s) / n); the
approximate cost drops the player's own contribution to the load.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .model import CapacityError, ModelError, ParameterError, RngLike, as_generator

EQ_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Affine:
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ParameterError("affine coefficients must be nonnegative")

    def __call__(self, x):
        return self.a * np.asarray(x, dtype=float) + self.b

    lipschitz = property(lambda self: self.a)


@dataclass(frozen=True)
class Monomial:
    coef: float
    degree: int

    def __post_init__(self):
        if self.coef < 0 or self.degree < 1 or int(self.degree) != self.degree:
            raise ParameterError("monomials need coef >= 0 and an integer degree >= 1")

    def __call__(self, x):
        return self.coef * np.asarray(x, dtype=float) ** self.degree

    lipschitz = property(lambda self: self.coef * self.degree)


@dataclass(frozen=True)
class General:
    """Piecewise-linear interpolation of a sampled latency on [0, 1]."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        xs, ys = np.asarray(self.xs, dtype=float), np.asarray(self.ys, dtype=float)
        if xs.size != ys.size or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ParameterError("sample points must be strictly increasing and paired")
        if xs[0] > 0 or xs[-1] < 1:
            raise ParameterError("samples must cover [0, 1]")
        if np.any(np.diff(ys) < 0) or np.any(ys < 0):
            raise ParameterError("latency samples must be nonnegative and nondecreasing")

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.diff(self.ys) / np.diff(self.xs)))


Latency = Union[Affine, Monomial, General]


def validate_latency(c: Latency, points: int = 1001) -> None:
    ys = np.asarray(c(np.linspace(0.0, 1.0, points)), dtype=float)
    if np.any(ys < 0) or np.any(np.diff(ys) < -1e-12) or not np.all(np.isfinite(ys)):
        raise ParameterError(f"{c} is not a nonnegative nondecreasing latency on [0, 1]")


class InadmissiblePath(ModelError):
    pass


@dataclass
class RoutingGame:
    """Edges with latencies and per-player admissible paths (tuples of edge indices)."""

    latencies: list
    paths: list  # paths[i] is player i's list of admissible paths
    n: int = field(init=False)

    def __post_init__(self):
        self.n = len(self.paths)
        for c in self.latencies:
            validate_latency(c)
        for i, options in enumerate(self.paths):
            if not options or any(not p for p in options):
                raise ParameterError(f"player {i} needs nonempty paths")
            for p in options:
                if any(not 0 <= e < len(self.latencies) for e in p):
                    raise ParameterError(f"player {i}: path {p} uses an unknown edge")

    @classmethod
    def symmetric(cls, latencies, paths, n: int) -> "RoutingGame":
        return cls(list(latencies), [list(paths)] * n)

    @classmethod
    def parallel(cls, latencies, n: int) -> "RoutingGame":
        return cls.symmetric(latencies, [(e,) for e in range(len(latencies))], n)

    @property
    def is_symmetric(self) -> bool:
        return all(p == self.paths[0] for p in self.paths)

    def loads(self, s) -> np.ndarray:
        """Number of players on each edge; ``s[i]`` indexes player i's path list."""
        counts = np.zeros(len(self.latencies), dtype=int)
        for i, a in enumerate(s):
            if not 0 <= a < len(self.paths[i]):
                raise InadmissiblePath(f"player {i} has no path {a}")
            for e in self.paths[i][a]:
                counts[e] += 1
        return counts

    def edge_cost(self, e: int, load) -> float:
        return float(self.latencies[e](load / self.n))

    def player_cost(self, s, i: int, loads=None) -> float:
        loads = self.loads(s) if loads is None else loads
        return sum(self.edge_cost(e, loads[e]) for e in self.paths[i][s[i]])


def social_cost(game: RoutingGame, s) -> float:
    loads = game.loads(s)
    return float(sum(game.player_cost(s, i, loads) for i in range(game.n)))


def approx_cost(game: RoutingGame, s, i: int) -> float:
    loads = game.loads(s)
    return sum(game.edge_cost(e, loads[e] - 1) for e in game.paths[i][s[i]])


def potential(game: RoutingGame, s) -> float:
    """Rosenthal potential sum_e sum_{j=1}^{n_e} c_e(j / n)."""
    loads = game.loads(s)
    return float(sum(game.edge_cost(e, j) for e, ne in enumerate(loads) for j in range(1, ne + 1)))


def smoothness_constants(latency_class: str, degree: int = 1) -> tuple[float, float]:
    """(lambda, mu) for affine latencies or degree-d monomials."""
    if latency_class == "affine":
        return 1.0, 0.25
    if latency_class == "monomial":
        if degree < 1:
            raise ParameterError("degree must be >= 1")
        d = float(degree)
        return 1.0, d * (d + 1) ** (-(d + 1) / d)
    raise ParameterError(f"unsupported latency class {latency_class!r}")


def check_pairwise_condition(c: Latency, lam: float, mu: float, resolution: int = 1000) -> tuple[float, float, float]:
    """min over the grid of lam x c(x) + mu y c(y) - x c(y); returns (slack, x, y)."""
    g = np.linspace(0.0, 1.0, resolution + 1)
    cg = np.asarray(c(g), dtype=float)
    slack = lam * (g * cg)[:, None] + mu * (g * cg)[None, :] - g[:, None] * cg[None, :]
    a, b = np.unravel_index(int(slack.argmin()), slack.shape)
    return float(slack[a, b]), float(g[a]), float(g[b])


# ---------------------------------------------------------------------------
# equilibria


def is_equilibrium(game: RoutingGame, s, tol: float = EQ_TOLERANCE) -> bool:
    return best_deviation(game, s)[0] <= tol


def best_deviation(game: RoutingGame, s) -> tuple[float, int | None, int | None]:
    """(largest cost reduction from a unilateral switch, player, path)."""
    s = list(s)
    loads = game.loads(s)
    best, who, where = 0.0, None, None
    for i in range(game.n):
        cur = game.player_cost(s, i, loads)
        own = game.paths[i][s[i]]
        for a, p in enumerate(game.paths[i]):
            if a == s[i]:
                continue
            cost = sum(game.edge_cost(e, loads[e] + (0 if e in own else 1)) for e in p)
            if cur - cost > best:
                best, who, where = cur - cost, i, a
    return best, who, where


class IterationCap(ModelError):
    def __init__(self, profile):
        self.profile = profile
        super().__init__("best-response descent hit its iteration cap")


def best_response_equilibrium(game: RoutingGame, rng: RngLike = None, start=None,
                              max_moves: int = 100_000) -> list[int]:
    """Round-robin best responses from ``start`` (random if omitted).

    Every accepted move lowers the Rosenthal potential, so the loop ends at a
    pure equilibrium.
    """
    if start is None:
        gen = as_generator(rng)
        s = [int(gen.integers(len(p))) for p in game.paths]
    else:
        s = list(start)
    moves = 0
    changed = True
    while changed:
        changed = False
        for i in range(game.n):
            loads = game.loads(s)
            own = game.paths[i][s[i]]
            cur = game.player_cost(s, i, loads)
            costs = [sum(game.edge_cost(e, loads[e] + (0 if e in own else 1)) for e in p) for p in game.paths[i]]
            a = int(np.argmin(costs))
            if costs[a] < cur - EQ_TOLERANCE:
                s[i] = a
                changed = True
                moves += 1
                if moves > max_moves:
                    raise IterationCap(s)
    return s


def _symmetric_profiles(game: RoutingGame):
    """One representative profile per multiset of path choices."""
    q = len(game.paths[0])
    for combo in itertools.combinations_with_replacement(range(q), game.n):
        yield list(combo)


def enumerate_profiles(game: RoutingGame, budget: int = 10**6):
    if game.is_symmetric:
        size = math.comb(game.n + len(game.paths[0]) - 1, game.n)
        if size > budget:
            raise CapacityError(f"{size} profiles exceed {budget}")
        yield from _symmetric_profiles(game)
        return
    size = math.prod(len(p) for p in game.paths)
    if size > budget:
        raise CapacityError(f"{size} profiles exceed {budget}")
    for combo in itertools.product(*[range(len(p)) for p in game.paths]):
        yield list(combo)


@dataclass
class ConvergenceRow:
    n: int
    worst_ne: float
    best_ne: float
    opt: float
    ratio: float
    relaxed_opt: float | None
    equilibria: int
    gap: float  # largest |true - approximate| cost of a single player over the tested equilibria


def exhaustive_table(game: RoutingGame) -> ConvergenceRow:
    """Worst and best pure equilibria and the optimum by full enumeration."""
    worst, best, opt, count, gap = -math.inf, math.inf, math.inf, 0, 0.0
    for s in enumerate_profiles(game):
        sc = social_cost(game, s)
        opt = min(opt, sc)
        if is_equilibrium(game, s):
            count += 1
            worst, best = max(worst, sc), min(best, sc)
            gap = max(gap, max(abs(game.player_cost(s, i) - approx_cost(game, s, i)) for i in range(game.n)))
    relaxed = relaxed_opt(game) if _is_parallel(game) else None
    return ConvergenceRow(game.n, worst, best, opt, worst / opt if opt > 0 else 1.0, relaxed, count, gap)


def _is_parallel(game: RoutingGame) -> bool:
    return game.is_symmetric and all(len(p) == 1 for p in game.paths[0])


def relaxed_opt(game: RoutingGame) -> float:
    """n * min sum_e x_e c_e(x_e) over the simplex (continuous lower bound for parallel links)."""
    from scipy.optimize import minimize

    edges = [p[0] for p in game.paths[0]]
    q = len(edges)

    def f(x):
        return float(sum(xi * game.latencies[e](xi) for xi, e in zip(x, edges)))

    res = minimize(f, np.full(q, 1.0 / q), method="SLSQP", bounds=[(0.0, 1.0)] * q,
                   constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1.0}])
    return game.n * float(res.fun)


def pigou(n: int, degree: int = 1) -> RoutingGame:
    top = Affine(1.0, 0.0) if degree == 1 else Monomial(1.0, degree)
    return RoutingGame.parallel([top, Affine(0.0, 1.0)], n)


def mandatory_edge(n: int) -> RoutingGame:
    return RoutingGame.parallel([Affine(1.0, 0.0)], n)


@dataclass
class ConvergenceReport:
    rows: list
    limit: float
    fitted_c: float  # max over n of (ratio - limit) * n, clipped at 0


def poa_convergence(family, ns: Sequence[int], lam: float, mu: float) -> ConvergenceReport:
    """Worst pure-equilibrium PoA against n, with the limit lam / (1 - mu)."""
    if mu >= 1:
        raise ParameterError("mu must be below 1")
    rows = [exhaustive_table(family(n)) for n in ns]
    limit = lam / (1.0 - mu)
    c = max([0.0] + [(r.ratio - limit) * r.n for r in rows])
    return ConvergenceReport(rows, limit, c)
