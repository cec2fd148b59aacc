"""Registry of reproducible experiments.  Each scenario turns (params, seed, trials) into result rows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import approx as A
from . import congestion as C
from . import equilibrium as E
from . import smoothness as S
from .model import (
    FixedSupply, GreedyBid, MarketConfig, ModelError, RngStream, SingleMinded,
)


@dataclass(frozen=True)
class Row:
    scenario: str
    n: int | str
    metric: str
    estimate: float
    stderr: float | str = ""
    target: float | str = ""
    tolerance: float | str = ""
    passed: bool | str = ""

    FIELDS = ("scenario", "n", "metric", "estimate", "stderr", "target", "tolerance", "pass")

    def values(self) -> list:
        return [self.scenario, self.n, self.metric, self.estimate, self.stderr,
                self.target, self.tolerance, self.passed]


@dataclass(frozen=True)
class Scenario:
    id: str
    claim: str
    params: dict  # name -> default (its type fixes the parsing of --param values)
    trials: int
    run: Callable[[dict, int, int], list[Row]]


def _rel_row(sid, n, metric, est, target, rel, sigmas=0.0):
    ok = abs(est.mean - target) <= rel * abs(target) + sigmas * est.stderr
    return Row(sid, n, metric, est.mean, est.stderr, target, rel, bool(ok))


def _ints(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


# ---------------------------------------------------------------------------


def run_example1(p, seed, trials):
    k = int(p["k"])
    rep = E.scenario_example1(k, trials, RngStream(seed, (1,)))
    tol = p["tolerance"]
    w = rep.welfare
    o = rep.opt
    rows = [
        _rel_row("example1", k, "welfare_per_capita", type(w)(w.mean / k, w.stderr / k, w.samples), 8 / 3, tol),
        _rel_row("example1", k, "opt_per_capita", type(o)(o.mean / k, o.stderr / k, o.samples), 2.75, tol),
        _rel_row("example1", k, "poa", rep.poa, 33 / 32, tol),
        Row("example1", k, "opt_per_capita_exact", rep.extras["opt_exact_per_capita"]),
        Row("example1", k, "max_deviation_gain", rep.max_regret, "", 0.0, 1e-9, bool(rep.max_regret <= 1e-9)),
        Row("example1", k, "mechanism_agrees", float(rep.extras["mechanism_agrees"]), "", 1.0, 0.0,
            bool(rep.extras["mechanism_agrees"])),
    ]
    return rows


def _supply_rows(sid, p, seed, trials, goods, target_poa, poa_tol):
    t = int(p["t"])
    rep = E.scenario_supply_counterexample(t, goods, trials, RngStream(seed, (2, goods)), p["split"])
    rows = [_rel_row(sid, t, "poa", rep.poa, target_poa, poa_tol)]
    if goods == 2:
        rows += [
            _rel_row(sid, t, "welfare_per_t", rep.extras["welfare_per_t"], 7 / 8, p["share_tolerance"]),
            _rel_row(sid, t, "opt_per_t", rep.extras["opt_per_t"], 11 / 12, p["share_tolerance"]),
        ]
        ex = rep.extras["excess"]
        rows.append(Row(sid, t, "mean_excess_xy", ex.mean, ex.stderr, 1 / 6, 1e-3, bool(abs(ex.mean - 1 / 6) <= 1e-3)))
    else:
        for key in ("welfare_per_t", "opt_per_t"):
            e = rep.extras[key]
            rows.append(Row(sid, t, key, e.mean, e.stderr))
    ok = bool(rep.extras["mechanism_agrees"])
    rows.append(Row(sid, t, "mechanism_agrees", float(ok), "", 1.0, 0.0, ok))
    return rows


def run_supply(p, seed, trials):
    return _supply_rows("supply-counterexample", p, seed, trials, 2, 22 / 21, p["tolerance"])


def run_supply_m(p, seed, trials):
    return _supply_rows("supply-counterexample-m", p, seed, trials, int(p["goods"]), 8 / 7, p["tolerance"])


def gap_example_bids(large: int) -> list[GreedyBid]:
    """Bidder 0 bids 2 on the second good, bidders 1 and 2 bid 1/2 and 1/4 on
    the first, and ``large`` bidders bid 1 on the pair."""
    return ([GreedyBid((1,), (2.0,)), GreedyBid((0,), (0.5,)), GreedyBid((0,), (0.25,))]
            + [GreedyBid((0, 1), (1.0,))] * large)


def run_greedy_gap(p, seed, trials):
    delta = float(p["delta"])
    k = int(p["k"])
    target = p["factor"] * (1 - delta) ** 2 * 0.25
    v1 = SingleMinded((0,), (0.0, 0.5), 2)
    rows = []
    for large in _ints(p["large"]):
        bids = gap_example_bids(large)
        cfg = MarketConfig(len(bids), 2, FixedSupply((k, k)), delta=delta, r=1, B=2.0, H=2.0, rho=0.25)
        if p["mode"] == "exact":
            g = A.utility_gap("greedy", bids, v1, 1, cfg, mode="exact")
        else:
            g = A.utility_gap("greedy", bids, v1, 1, cfg, mode="mc", rng=RngStream(seed, (5, large)), trials=trials)
        rows.append(Row("greedy-gap", len(bids), "gap_bidder1", g.gap, g.stderr, target, "lower bound",
                        bool(g.gap >= target - 3 * g.stderr)))
        rows.append(Row("greedy-gap", len(bids), "true_utility", g.true.mean, g.true.stderr))
        rows.append(Row("greedy-gap", len(bids), "approx_utility", g.approx.mean, g.approx.stderr))
    return rows


def run_uniform_smoothness(p, seed, trials):
    rows, total = [], 0
    for inst in S.uniform_battery(int(p["battery_seed"]), float(p["B"])):
        rep = S.check_smoothness("uniform", p["kind"], 1.0, 1.0, inst, S.Grid(float(p["B"]) / 4))
        total += rep.count
        rows.append(Row("uniform-smoothness", inst.n, f"min_slack[{inst.name}]", rep.min_slack, "", 0.0,
                        S.TOLERANCE, bool(rep.ok and rep.revenue_identity)))
    rows.append(Row("uniform-smoothness", "all", "evaluations", float(total), "", 1e5, "lower bound", total >= 1e5))
    return rows


def run_greedy_smoothness(p, seed, trials):
    rows, total = [], 0
    insts = S.greedy_battery(int(p["battery_seed"]), float(p["B"])) + [S.gap_instance()]
    for idx, inst in enumerate(insts):
        d = float(S.max_set_size(inst))
        grid = S.check_smoothness("greedy", "approx", 1.0, d, inst, S.Grid(inst.B / 4))
        rand = S.check_smoothness("greedy", "approx", 1.0, d, inst,
                                  S.RandomProfiles(trials, RngStream(seed, (6, idx))))
        total += grid.count + rand.count
        for label, rep in (("grid", grid), ("random", rand)):
            rows.append(Row("greedy-smoothness", inst.n, f"min_slack[{inst.name}:{label}:d={int(d)}]",
                            rep.min_slack, "", 0.0, S.TOLERANCE, rep.ok))
    rows.append(Row("greedy-smoothness", "all", "evaluations", float(total)))
    return rows


def run_congestion(p, seed, trials):
    rows = []
    ns = _ints(p["n"])
    lam, mu = C.smoothness_constants("affine")
    rep = C.poa_convergence(C.pigou, ns, lam, mu)
    for r in rep.rows:
        ok = 1.0 <= r.ratio <= 4 / 3 + 1 / r.n
        rows.append(Row("congestion-convergence", r.n, "worst_ne_poa", r.ratio, "", 4 / 3, 1 / r.n, bool(ok)))
        rows.append(Row("congestion-convergence", r.n, "relaxed_opt_le_opt", r.relaxed_opt, "", r.opt, 1e-6,
                        bool(r.relaxed_opt <= r.opt + 1e-6)))
    rows.append(Row("congestion-convergence", "all", "fitted_c", rep.fitted_c))
    slack, _, _ = C.check_pairwise_condition(C.Affine(1.0), lam, mu, int(p["resolution"]))
    rows.append(Row("congestion-convergence", "grid", "pairwise_slack_affine", slack, "", 0.0, 1e-6, slack >= -1e-6))
    _, mu2 = C.smoothness_constants("monomial", 2)
    err = abs(mu2 - 2 * 3 ** -1.5)
    rows.append(Row("congestion-convergence", "d=2", "monomial_mu", mu2, "", 2 * 3 ** -1.5, 1e-12, err <= 1e-12))
    slack2, _, _ = C.check_pairwise_condition(C.Monomial(1.0, 2), 1.0, mu2, int(p["resolution"]))
    rows.append(Row("congestion-convergence", "grid", "pairwise_slack_monomial2", slack2, "", 0.0, 1e-6,
                    slack2 >= -1e-6))
    rep2 = C.poa_convergence(lambda n: C.pigou(n, 2), ns, 1.0, mu2)
    for r in rep2.rows:
        rows.append(Row("congestion-convergence", r.n, "worst_ne_poa_monomial2", r.ratio, "", rep2.limit,
                        1 / r.n, bool(r.ratio <= rep2.limit + 1 / r.n)))
    return rows


def run_rate(p, seed, trials):
    rows = []
    delta = float(p["delta"])
    for eps in _floats(p["epsilon"]):
        inputs = S.RateInputs(eps, delta, 1, float(p["B"]), float(p["H"]), 1, float(p["rho"]))
        thr = S.required_supply_r1(inputs)
        rows.append(Row("rate-verification", thr, f"required_supply_r1[eps={eps:g}]", float(thr)))
        rows.append(Row("rate-verification", thr, f"required_supply_general[eps={eps:g}]",
                        float(S.required_supply_general(inputs))))
        for div in (16, 4, 1):
            k = max(1, thr // div)
            name, g = A.sup_gap(k, delta, trials, RngStream(seed, (7, k)), float(p["B"]), float(p["H"]))
            if div == 1:
                rows.append(Row("rate-verification", k, f"sup_gap[eps={eps:g}]", g.gap, g.stderr, eps,
                                "3 stderr", bool(g.gap <= eps + 3 * g.stderr)))
            else:
                rows.append(Row("rate-verification", k, f"sup_gap[eps={eps:g}]", g.gap, g.stderr))
    small, large = _ints(p["compare_k"])
    gaps = []
    for k in (small, large):
        g = A.unit_bid_gap([0.5], [2 * k], 0.5, 1.0, k, delta, trials, RngStream(seed, (8, k)))
        gaps.append(g)
        rows.append(Row("rate-verification", k, "all_tied_gap", g.gap, g.stderr))
    diff = gaps[0].gap - gaps[1].gap
    se = math.hypot(gaps[0].stderr, gaps[1].stderr)
    rows.append(Row("rate-verification", f"{small}vs{large}", "all_tied_gap_decrease", diff, se, 0.0,
                    "3 stderr", bool(diff > 3 * se)))
    return rows


def run_tail(p, seed, trials):
    rows = []
    eps, delta = float(p["epsilon"]), float(p["delta"])
    q = math.ceil(4 / (eps**2 * delta * (1 - delta)) - 1e-9)
    worst = None
    for idx, count in enumerate(_ints(p["bidders"])):
        b = np.zeros((count + int(p["low_bidders"]), 1, 1))
        b[:count] = 1.0
        b[count:] = 0.25
        est = S.point_probability(b, 0.5, q, delta, trials, RngStream(seed, (9, idx)))
        rows.append(Row("tail-check", count, f"pr_count_eq_{q}", est.mean, est.stderr))
        if worst is None or est.mean > worst[1].mean:
            worst = (count, est)
    count, est = worst
    rows.append(Row("tail-check", count, "worst_pr", est.mean, est.stderr, eps, "3 stderr",
                    bool(est.mean <= eps + 3 * est.stderr)))
    viol = S.binomial_bound_violations(range(1, int(p["max_t"]) + 1), [i / 10 for i in range(1, 10)])
    rows.append(Row("tail-check", int(p["max_t"]), "binomial_bound_violations", float(len(viol)), "", 0.0, 0.0,
                    not viol))
    return rows


REGISTRY: dict[str, Scenario] = {s.id: s for s in [
    Scenario("example1", "no-noise uniform auction: welfare k*8/3 vs optimum k*2.75",
             {"k": 50, "tolerance": 0.01}, 100_000, run_example1),
    Scenario("supply-counterexample", "supply uncertainty leaves PoA 22/21 with two goods",
             {"t": 2000, "split": "even", "tolerance": 0.01, "share_tolerance": 0.005}, 10_000, run_supply),
    Scenario("supply-counterexample-m", "with many goods the PoA tends to 8/7",
             {"t": 2000, "goods": 32, "split": "even", "tolerance": 0.015}, 10_000, run_supply_m),
    Scenario("greedy-gap", "greedy auction under noisy arrival: approximate utility gap does not vanish",
             {"large": "6,10,14", "k": 3, "delta": 0.5, "factor": 0.8, "mode": "exact"}, 20_000, run_greedy_gap),
    Scenario("uniform-smoothness", "approximate utilities of the uniform auction are (1,1)-smooth",
             {"battery_seed": 0, "B": 1.0, "kind": "approx"}, 0, run_uniform_smoothness),
    Scenario("greedy-smoothness", "approximate utilities of the greedy auction are (1,d)-smooth",
             {"battery_seed": 0, "B": 1.0}, 2_000, run_greedy_smoothness),
    Scenario("congestion-convergence", "atomic Pigou PoA approaches 4/3",
             {"n": "2,4,8,12", "resolution": 1000}, 0, run_congestion),
    Scenario("rate-verification", "gap below epsilon at the r=1 supply threshold",
             {"epsilon": "0.25", "delta": 0.5, "B": 1.0, "H": 1.0, "rho": 1.0, "compare_k": "16,256"},
             100_000, run_rate),
    Scenario("tail-check", "point masses of the arriving-bid count stay below epsilon",
             {"epsilon": 0.2, "delta": 0.5, "bidders": "400,600,700,800,900,1000,1600", "low_bidders": 200,
              "max_t": 512}, 100_000, run_tail),
]}


def coerce(default, text: str):
    """Parse ``text`` with the type of ``default``."""
    if isinstance(default, bool):
        return str(text).lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return str(text)


def run_safely(scenario: Scenario, params: dict, seed: int, trials: int) -> list[Row]:
    """Run a scenario; a library error becomes a failed row instead of a crash."""
    try:
        return scenario.run(params, seed, trials)
    except ModelError as exc:
        return [Row(scenario.id, "", f"error:{type(exc).__name__}", math.nan, "", "", "", False)]
