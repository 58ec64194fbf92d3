"""Game generators and sampling experiments over incorporation orders.

Sampling many random orders produces a set of distinct core payoffs (the
empirical core of a game); the reports compare their welfare and fairness
to the LP optima.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .incorporate import incorporate_payoff, incorporate_spider, random_valid_order
from .lp.game import demand_incident, fairness_lp, sw_lp
from .model import GameInstance, as_fraction, format_rational, path_instance, payoff
from .verify import verify_core

__all__ = [
    "MODELS",
    "gen_constant",
    "gen_gaussian",
    "gen_random_graph",
    "generate",
    "truncated_normal",
    "round_half_away",
    "EcoreReport",
    "run_ecore",
    "TimeMatrix",
    "time_matrix",
    "sweep",
    "parse_grid",
    "write_ecore_csv",
    "write_timematrix_csv",
    "default_workers",
]

MODELS = ("constant", "gaussian", "random")


def gen_constant(n: int, C, D) -> GameInstance:
    """Path of ``n`` players, every capacity ``C`` and every pair's demand ``D``."""
    if n < 2:
        raise ValueError("need at least two players")
    C, D = as_fraction(C), as_fraction(D)
    if C < 0 or D < 0:
        raise ValueError("C and D must be nonnegative")
    demands = {(u, v): D for u in range(1, n + 1) for v in range(u + 1, n + 1)}
    return path_instance([C] * n, demands)


def truncated_normal(rng: np.random.Generator, size: int, mu: float, sigma: float, low: float, high: float) -> np.ndarray:
    """Inverse-CDF draws from ``N(mu, sigma)`` conditioned on ``[low, high]``."""
    a = ndtr((low - mu) / sigma)
    b = ndtr((high - mu) / sigma)
    u = rng.random(size)
    return mu + sigma * ndtri(a + u * (b - a))


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, ties away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def gen_gaussian(n: int, C, D: int, seed: int) -> GameInstance:
    """Draw ``D`` demand units on pairs whose coordinates follow a normal
    truncated to ``[1, n]`` (mean ``n/2``, deviation ``2√n``); each player's
    capacity is ``C`` times its total demand.

    Pairs that round to the same player are redrawn, so exactly ``D`` units
    are placed.
    """
    if n < 2:
        raise ValueError("need at least two players")
    if D < 0 or int(D) != D:
        raise ValueError("D must be a nonnegative integer")
    C = as_fraction(C)
    if C < 0:
        raise ValueError("C must be nonnegative")
    rng = np.random.default_rng(seed)
    mu, sigma = n / 2, 2 * math.sqrt(n)
    demands: dict = {}
    need = int(D)
    while need:
        pts = truncated_normal(rng, 2 * need, mu, sigma, 1, n)
        pts = np.clip(round_half_away(pts), 1, n).astype(int)
        for u, v in pts.reshape(-1, 2):
            if u == v:
                continue
            key = (int(min(u, v)), int(max(u, v)))
            demands[key] = demands.get(key, 0) + 1
            need -= 1
    marginal = [0] * (n + 1)
    for (u, v), d in demands.items():
        marginal[u] += d
        marginal[v] += d
    return path_instance([C * marginal[v] for v in range(1, n + 1)], demands)


def gen_random_graph(n: int, C: int, D: int, seed: int) -> GameInstance:
    """Integer capacities uniform on ``[1, C]``; each pair present with
    probability 1/2 with an integer demand uniform on ``[1, D]``."""
    if n < 2:
        raise ValueError("need at least two players")
    if C < 1 or D < 1:
        raise ValueError("C and D must be at least 1")
    rng = np.random.default_rng(seed)
    caps = rng.integers(1, int(C), size=n, endpoint=True)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < 0.5
    weights = rng.integers(1, int(D), size=iu.size, endpoint=True)
    demands = {(int(u) + 1, int(v) + 1): int(w) for u, v, w, k in zip(iu, iv, weights, keep) if k}
    return path_instance([int(c) for c in caps], demands)


def generate(model: str, n: int, C, D, seed: int | None = None) -> GameInstance:
    """Dispatch to the generator named ``model`` (one of :data:`MODELS`)."""
    if model == "constant":
        return gen_constant(n, C, D)
    if seed is None:
        raise ValueError(f"model {model!r} needs a seed")
    if model == "gaussian":
        return gen_gaussian(n, C, int(D), seed)
    if model == "random":
        return gen_random_graph(n, int(C), int(D), seed)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def default_workers() -> int:
    """Worker count from ``FLOWCORE_THREADS`` (default 1)."""
    raw = os.environ.get("FLOWCORE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _sample_rngs(seed: int, start: int, stop: int) -> Iterable[np.random.Generator]:
    # sample i always gets the same stream, whatever the worker split
    for i in range(start, stop):
        yield np.random.default_rng([seed, i])


def _sample_payoffs(instance: GameInstance, seed: int, start: int, stop: int) -> list:
    out = []
    for rng in _sample_rngs(seed, start, stop):
        order = random_valid_order(instance, rng=rng)
        if instance.topology == "spider":
            out.append((payoff(instance, incorporate_spider(instance, order)), order.nodes))
        else:
            out.append((incorporate_payoff(instance, order.nodes), order.nodes))
    return out


def _chunks(samples: int, workers: int) -> list:
    step = max(1, math.ceil(samples / (4 * workers)))
    return [(i, min(samples, i + step)) for i in range(0, samples, step)]


def _collect(instance, samples, seed, workers) -> list:
    if workers <= 1 or samples < 64:
        return _sample_payoffs(instance, seed, 0, samples)
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sample_payoffs, instance, seed, a, b) for a, b in _chunks(samples, workers)]
        for fut in futures:
            out.extend(fut.result())
    return out


@dataclass(frozen=True)
class Stat:
    min: Fraction
    mean: Fraction
    max: Fraction

    @classmethod
    def of(cls, values: Sequence[Fraction], weights: Sequence[int]) -> "Stat":
        total = sum(weights)
        mean = sum((v * w for v, w in zip(values, weights)), Fraction(0)) / total
        return cls(min(values), mean, max(values))

    def to_dict(self) -> dict:
        return {k: _num(getattr(self, k)) for k in ("min", "mean", "max")}


def _num(x: Fraction) -> dict:
    return {"exact": format_rational(x), "decimal": f"{float(x):.6f}"}


@dataclass(frozen=True)
class EcoreReport:
    """Distinct payoffs from ``samples`` random orders and their statistics.

    ``sw`` and ``fairness`` statistics are taken over all samples, so a
    payoff drawn often weighs more in the mean.  ``vectors`` maps each
    distinct payoff to the number of samples producing it.
    """

    samples: int
    seed: int
    vectors: dict
    sw: Stat
    fairness: Stat
    lp_sw: Fraction | None
    lp_fairness: Fraction | None
    eligible: tuple
    audited: bool = False
    audit_failures: tuple = field(default_factory=tuple)

    @property
    def distinct(self) -> int:
        return len(self.vectors)

    def to_dict(self, with_vectors: bool = True) -> dict:
        out = {
            "samples": self.samples,
            "seed": self.seed,
            "distinct_core_vectors": self.distinct,
            "sw": self.sw.to_dict(),
            "fairness": self.fairness.to_dict(),
            "lp_sw": None if self.lp_sw is None else _num(self.lp_sw),
            "lp_fairness": None if self.lp_fairness is None else _num(self.lp_fairness),
            "audited": self.audited,
            "audit_failures": [[format_rational(x) for x in p] for p in self.audit_failures],
        }
        if with_vectors:
            out["vectors"] = [
                {"payoff": [format_rational(x) for x in p], "count": c}
                for p, c in sorted(self.vectors.items(), key=lambda item: (-item[1], item[0]))
            ]
        return out


def _fair(pay, positions) -> Fraction:
    return min((pay[i] for i in positions), default=Fraction(0))


def run_ecore(
    instance: GameInstance,
    samples: int,
    seed: int,
    audit: bool = False,
    lp: bool = True,
    workers: int | None = None,
) -> EcoreReport:
    """Sample random incorporation orders and summarize the distinct payoffs.

    Fairness is the minimum payoff over nodes incident to a positive
    demand.  ``audit`` re-verifies every distinct payoff exactly;
    ``lp=False`` skips the two LP optima.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if instance.topology not in ("path", "spider"):
        raise ValueError("sampling needs a path or spider")
    workers = default_workers() if workers is None else workers
    counts: dict = {}
    for pay, _ in _collect(instance, samples, seed, workers):
        counts[pay] = counts.get(pay, 0) + 1
    eligible = tuple(demand_incident(instance))
    idx = instance.index
    positions = [idx[v] for v in eligible]
    vecs = list(counts)
    weights = [counts[p] for p in vecs]
    sw = Stat.of([sum(p, Fraction(0)) for p in vecs], weights)
    fairness = Stat.of([_fair(p, positions) for p in vecs], weights)
    lp_sw = lp_fair = None
    if lp:
        lp_sw = sw_lp(instance)[0]
        lp_fair = fairness_lp(instance, eligible)[0] if eligible else Fraction(0)
    failures = ()
    if audit:
        failures = tuple(p for p in vecs if not verify_core(instance, p).in_core)
    return EcoreReport(samples, seed, counts, sw, fairness, lp_sw, lp_fair, eligible, audit, failures)


@dataclass(frozen=True)
class TimeMatrix:
    """Exact payoff sums and counts indexed by (path position, incorporation time), both 1-based."""

    n: int
    sums: tuple
    counts: tuple

    def average(self, position: int, time: int) -> Fraction | None:
        c = self.counts[position - 1][time - 1]
        return None if c == 0 else self.sums[position - 1][time - 1] / c

    @property
    def avg(self) -> np.ndarray:
        """Float matrix of averages; ``nan`` where a pair never occurred."""
        out = np.full((self.n, self.n), np.nan)
        for i in range(self.n):
            for t in range(self.n):
                if self.counts[i][t]:
                    out[i, t] = float(self.sums[i][t] / self.counts[i][t])
        return out

    def rows(self) -> Iterable[tuple]:
        for i in range(self.n):
            for t in range(self.n):
                yield i + 1, t + 1, self.average(i + 1, t + 1), self.counts[i][t]


def time_matrix(instance: GameInstance, samples: int, seed: int, workers: int | None = None) -> TimeMatrix:
    """Average payoff of each path position by the time it was incorporated."""
    if instance.topology != "path":
        raise ValueError("time matrix needs a path")
    workers = default_workers() if workers is None else workers
    n = instance.n
    idx = instance.index
    pos = instance.position
    sums = [[Fraction(0)] * n for _ in range(n)]
    counts = [[0] * n for _ in range(n)]
    for pay, nodes in _collect(instance, samples, seed, workers):
        for t, v in enumerate(nodes):
            p = pos[v]
            sums[p][t] += pay[idx[v]]
            counts[p][t] += 1
    return TimeMatrix(n, tuple(map(tuple, sums)), tuple(map(tuple, counts)))


def parse_grid(text: str) -> list:
    """``"start:stop:step"`` (stop included when hit) or a comma list of rationals."""
    if ":" in text:
        parts = [as_fraction(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(Fraction(1))
        start, stop, step = parts
        if step <= 0:
            raise ValueError("grid step must be positive")
        out, x = [], start
        while x <= stop:
            out.append(x)
            x += step
        return out
    return [as_fraction(p) for p in text.split(",") if p.strip()]


def sweep(
    model: str,
    n: int,
    D,
    c_grid: Sequence,
    samples: int,
    seed: int,
    audit: bool = False,
    workers: int | None = None,
) -> list:
    """``[(C, EcoreReport)]`` for each capacity parameter in ``c_grid``.

    Random models draw each game from a child seed of ``seed`` indexed by
    the grid position; sampling uses ``seed`` itself.
    """
    children = np.random.SeedSequence(seed).spawn(len(c_grid))
    out = []
    for C, child in zip(c_grid, children):
        game_seed = int(child.generate_state(1, dtype=np.uint64)[0])
        inst = generate(model, n, C, D, game_seed)
        out.append((as_fraction(C), run_ecore(inst, samples, seed, audit=audit, workers=workers)))
    return out


ECORE_COLUMNS = ["C", "distinct", "sw_min", "sw_mean", "sw_max", "lp_sw", "fair_min", "fair_mean", "fair_max", "lp_fair"]


def _write_header(fh, header: dict | None):
    for k, v in sorted((header or {}).items()):
        fh.write(f"# {k}: {v}\n")


def _dec(x) -> str:
    return "" if x is None else f"{float(x):.6f}"


def write_ecore_csv(rows: Sequence, path, header: dict | None = None) -> None:
    """One CSV row per grid point; ``#`` comment lines carry ``header``."""
    with open(path, "w", newline="") as fh:
        _write_header(fh, header)
        w = csv.writer(fh)
        w.writerow(ECORE_COLUMNS)
        for C, r in rows:
            w.writerow(
                [format_rational(C), r.distinct]
                + [_dec(x) for x in (r.sw.min, r.sw.mean, r.sw.max, r.lp_sw)]
                + [_dec(x) for x in (r.fairness.min, r.fairness.mean, r.fairness.max, r.lp_fairness)]
            )


def write_timematrix_csv(tm: TimeMatrix, path, header: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _write_header(fh, header)
        w = csv.writer(fh)
        w.writerow(["position", "time", "avg", "count"])
        for p, t, a, c in tm.rows():
            w.writerow([p, t, _dec(a), c])
