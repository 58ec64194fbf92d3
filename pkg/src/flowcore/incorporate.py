"""Greedy core construction on paths and spiders.

Nodes are incorporated one at a time so that the incorporated set stays
connected.  When ``v`` joins, every commodity ``kv`` with ``k`` already
incorporated is routed as far as residual capacity allows, closest ``k``
first.  Spiders are handled by dropping commodities between different legs,
running from the root, and routing the dropped commodities afterwards.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .model import (
    UNBOUNDED,
    Flow,
    GameInstance,
    StructureError,
    commodity_key,
    format_rational,
    residual_capacities,
)

__all__ = [
    "IncorporationOrder",
    "TraceEvent",
    "RoutingTrace",
    "IncorporateResult",
    "UnsupportedTopology",
    "route",
    "incorporate",
    "incorporate_payoff",
    "reduce_spider",
    "spider_legs",
    "incorporate_spider",
    "random_valid_order",
    "enumerate_orders",
    "count_orders",
    "allowed_starts",
]


class UnsupportedTopology(StructureError):
    """The operation needs a path or spider supply graph."""


@dataclass(frozen=True)
class IncorporationOrder:
    start: int
    sequence: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(self.sequence))

    @classmethod
    def from_nodes(cls, nodes: Sequence[int]) -> "IncorporationOrder":
        nodes = list(nodes)
        return cls(nodes[0], tuple(nodes[1:]))

    @property
    def nodes(self) -> tuple:
        return (self.start,) + self.sequence

    def validate(self, instance: GameInstance) -> None:
        nodes = self.nodes
        if sorted(nodes) != sorted(instance.nodes):
            raise StructureError("order must list every node exactly once")
        if self.start not in allowed_starts(instance):
            raise StructureError(f"node {self.start} is not an allowed start")
        seen = {self.start}
        adj = instance.adjacency
        for v in self.sequence:
            if not any(w in seen for w in adj[v]):
                raise StructureError(f"node {v} is not adjacent to the incorporated set")
            seen.add(v)

    def __str__(self):
        return f"({self.start}; {', '.join(map(str, self.sequence))})"


class TraceEvent(NamedTuple):
    step: int
    commodity: tuple
    amount: Fraction
    bottleneck: int | None


@dataclass
class RoutingTrace:
    """Routing events in order, plus when each node and pair became incorporated.

    ``time[v]`` is the 1-based step at which ``v`` joined; the processing time
    of a pair is the later of its two node times.
    """

    events: list = field(default_factory=list)
    time: dict = field(default_factory=dict)

    def pair_time(self, u: int, v: int) -> int:
        return max(self.time[u], self.time[v])

    def to_jsonl(self) -> str:
        lines = []
        for ev in self.events:
            lines.append(
                json.dumps(
                    {
                        "step": ev.step,
                        "commodity": list(ev.commodity),
                        "amount": format_rational(ev.amount),
                        "bottleneck": ev.bottleneck,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")


class IncorporateResult(NamedTuple):
    flow: Flow
    trace: RoutingTrace


def _require_tree(instance: GameInstance) -> None:
    if instance.topology not in ("path", "spider"):
        raise UnsupportedTopology(
            f"unique routing paths need a path or spider, got {instance.topology!r}"
        )


def allowed_starts(instance: GameInstance) -> list:
    """Spiders must start at the root; paths may start anywhere."""
    _require_tree(instance)
    if instance.topology == "spider":
        return [instance.root]
    return list(instance.nodes)


def route(residual: dict, instance: GameInstance, key, amounts: dict) -> tuple:
    """Route as much of commodity ``key`` as residual capacity allows.

    ``residual`` (node → capacity left) and ``amounts`` (commodity → routed
    so far) are updated in place.  Returns ``(increment, bottleneck)`` where
    ``bottleneck`` is the node that limited the increment, or ``None`` when
    the remaining demand was the limit.
    """
    _require_tree(instance)
    key = commodity_key(*key)
    if key not in instance.demands:
        raise StructureError(f"unknown commodity {key}")
    path = instance.tree_path(*key)
    remaining = instance.demands[key] - amounts.get(key, 0)
    inc, bottleneck = remaining, None
    for x in path:
        if residual[x] < inc:
            inc, bottleneck = residual[x], x
    if inc > 0:
        for x in path:
            residual[x] = residual[x] - inc
    amounts[key] = amounts.get(key, 0) + inc
    return inc, bottleneck


# -- integer-scaled fast path ---------------------------------------------------


class _Prepared:
    """Instance data rescaled to integers for fast exact greedy routing."""

    def __init__(self, instance: GameInstance):
        _require_tree(instance)
        self.instance = instance
        finite = [c for c in instance.capacity.values() if c is not UNBOUNDED]
        dens = [x.denominator for x in finite] + [d.denominator for d in instance.demands.values()]
        scale = 1
        for d in dens:
            scale = scale * d // math.gcd(scale, d)
        self.scale = scale
        idx = instance.index
        self.cap = [
            math.inf if instance.capacity[v] is UNBOUNDED else int(instance.capacity[v] * scale)
            for v in instance.nodes
        ]
        self.demand = {}
        self.paths = {}
        for key, d in instance.demands.items():
            ik = (idx[key[0]], idx[key[1]])
            self.demand[ik] = int(d * scale)
            self.paths[ik] = [idx[x] for x in instance.tree_path(*key)]
        n = instance.n
        self.dist = [[instance.distance(a, b) for b in instance.nodes] for a in instance.nodes]
        self.partners = [[] for _ in range(n)]
        for a, b in self.demand:
            self.partners[a].append(b)
            self.partners[b].append(a)

    def run(self, order_idx: Sequence[int], record: bool = False):
        res = list(self.cap)
        amounts = {}
        events = []
        incorporated = [False] * len(res)
        incorporated[order_idx[0]] = True
        dist, demand, paths = self.dist, self.demand, self.paths
        for step, v in enumerate(order_idx[1:], start=2):
            dv = dist[v]
            partners = [k for k in self.partners[v] if incorporated[k]]
            partners.sort(key=lambda k: (dv[k], k))
            incorporated[v] = True
            for k in partners:
                ik = (k, v) if k < v else (v, k)
                path = paths[ik]
                inc = demand[ik]
                bottleneck = None
                for x in path:
                    if res[x] < inc:
                        inc, bottleneck = res[x], x
                if inc > 0:
                    for x in path:
                        res[x] -= inc
                amounts[ik] = inc
                if record:
                    events.append((step, ik, inc, bottleneck))
        return amounts, events


def _prepared(instance: GameInstance) -> _Prepared:
    prep = instance.__dict__.get("_flowcore_prepared")
    if prep is None:
        prep = _Prepared(instance)
        instance.__dict__["_flowcore_prepared"] = prep
    return prep


def incorporate(instance: GameInstance, order: IncorporationOrder | None = None) -> IncorporateResult:
    """Run the incorporation greedy for ``order`` (default: start at the root
    for spiders, node 1 for paths, then breadth-first by node id).

    On a path the payoff of the returned flow is in the core for every valid
    order.  Spiders with commodities between different legs should go through
    :func:`incorporate_spider` instead.
    """
    _require_tree(instance)
    if order is None:
        order = _default_order(instance, allowed_starts(instance)[0])
    order.validate(instance)
    prep = _prepared(instance)
    idx = instance.index
    amounts, events = prep.run([idx[v] for v in order.nodes], record=True)
    nodes = instance.nodes
    s = prep.scale
    flow = Flow.from_amounts(
        instance,
        {(nodes[a], nodes[b]): Fraction(amt, s) for (a, b), amt in amounts.items() if amt},
    )
    trace = RoutingTrace(
        events=[
            TraceEvent(step, (nodes[a], nodes[b]), Fraction(amt, s), None if bn is None else nodes[bn])
            for step, (a, b), amt, bn in events
        ],
        time={v: t for t, v in enumerate(order.nodes, start=1)},
    )
    return IncorporateResult(flow, trace)


def incorporate_payoff(instance: GameInstance, order_nodes: Sequence[int]) -> tuple:
    """Payoff tuple of :func:`incorporate` without building a :class:`Flow`.

    ``order_nodes`` is the full incorporation sequence; it is not validated.
    """
    prep = _prepared(instance)
    idx = instance.index
    amounts, _ = prep.run([idx[v] for v in order_nodes])
    pay = [0] * instance.n
    for (a, b), amt in amounts.items():
        pay[a] += amt
        pay[b] += amt
    s = prep.scale
    return tuple(Fraction(p, s) for p in pay)


def _default_order(instance: GameInstance, start: int) -> IncorporationOrder:
    rest = sorted((v for v in instance.nodes if v != start), key=lambda v: (instance.distance(start, v), v))
    return IncorporationOrder(start, tuple(rest))


# -- spiders --------------------------------------------------------------------


def spider_legs(instance: GameInstance, root: int | None = None) -> list:
    """Legs of a spider (or of a path viewed from ``root``) as sorted node lists,
    ordered by their node adjacent to the root."""
    _require_tree(instance)
    root = instance.root if root is None else root
    if root is None:
        raise StructureError("a root is needed to split a path into legs")
    legs = []
    for first in instance.adjacency[root]:
        leg = []
        stack = [(first, root)]
        while stack:
            cur, prev = stack.pop()
            leg.append(cur)
            stack.extend((w, cur) for w in instance.adjacency[cur] if w != prev)
        legs.append(sorted(leg))
    return legs


def reduce_spider(instance: GameInstance, root: int | None = None) -> tuple:
    """Drop commodities whose endpoints lie on different legs.

    Returns ``(reduced instance, removed)`` where ``removed`` lists the
    dropped ``(key, demand)`` pairs sorted by (leg indices, endpoints).
    """
    _require_tree(instance)
    root = instance.root if root is None else root
    legs = spider_legs(instance, root)
    leg_of = {v: i for i, leg in enumerate(legs) for v in leg}
    kept, removed = {}, []
    for (u, v), d in instance.demands.items():
        if u != root and v != root and leg_of[u] != leg_of[v]:
            legs_uv = tuple(sorted((leg_of[u], leg_of[v])))
            removed.append((legs_uv, (u, v), d))
        else:
            kept[(u, v)] = d
    removed.sort()
    reduced = GameInstance(
        nodes=instance.nodes,
        edges=instance.edges,
        capacity=instance.capacity,
        demands=kept,
        topology=instance.topology,
        root=root,
    )
    return reduced, [(key, d) for _, key, d in removed]


def incorporate_spider(instance: GameInstance, order: IncorporationOrder | None = None) -> Flow:
    """Core flow for a spider: incorporate from the root on the reduced game,
    then greedily route the removed inter-leg commodities."""
    _require_tree(instance)
    root = instance.root
    if root is None:
        raise StructureError("spider needs a root")
    reduced, removed = reduce_spider(instance, root)
    if order is None:
        order = _default_order(reduced, root)
    if order.start != root:
        raise StructureError("spider incorporation must start at the root")
    flow, _ = incorporate(reduced, order)
    residual = residual_capacities(instance, flow)
    amounts = dict(flow.amounts)
    for key, _ in removed:
        route(residual, instance, key, amounts)
    return Flow.from_amounts(instance, amounts)


# -- orders ----------------------------------------------------------------------


def random_valid_order(instance: GameInstance, seed=None, rng: np.random.Generator | None = None) -> IncorporationOrder:
    """Uniform start among allowed starts, then a uniform frontier node each step."""
    if rng is None:
        rng = np.random.default_rng(seed)
    starts = allowed_starts(instance)
    start = starts[int(rng.integers(len(starts)))]
    adj = instance.adjacency
    seen = {start}
    frontier = set(adj[start])
    seq = []
    while frontier:
        choices = sorted(frontier)
        v = choices[int(rng.integers(len(choices)))]
        seq.append(v)
        seen.add(v)
        frontier.discard(v)
        frontier.update(w for w in adj[v] if w not in seen)
    return IncorporationOrder(start, tuple(seq))


def enumerate_orders(instance: GameInstance, limit: int = 100_000) -> list:
    """Every valid order in lexicographic order; raises if more than ``limit``."""
    adj = instance.adjacency
    out = []

    def grow(prefix, seen, frontier):
        if not frontier:
            out.append(IncorporationOrder(prefix[0], tuple(prefix[1:])))
            if len(out) > limit:
                raise ValueError(f"more than {limit} valid orders")
            return
        for v in sorted(frontier):
            new_frontier = (frontier - {v}) | {w for w in adj[v] if w not in seen}
            seen.add(v)
            prefix.append(v)
            grow(prefix, seen, new_frontier)
            prefix.pop()
            seen.discard(v)

    for s in allowed_starts(instance):
        grow([s], {s}, set(adj[s]))
    return out


def count_orders(instance: GameInstance) -> int:
    """Number of valid orders (tree hook-length formula per allowed start)."""
    total = 0
    fact = math.factorial(instance.n)
    for s in allowed_starts(instance):
        sizes = _subtree_sizes(instance, s)
        denom = 1
        for sz in sizes.values():
            denom *= sz
        total += fact // denom
    return total


def _subtree_sizes(instance: GameInstance, root: int) -> dict:
    adj = instance.adjacency
    order, parent = [root], {root: None}
    for u in order:
        for w in adj[u]:
            if w not in parent:
                parent[w] = u
                order.append(w)
    size = {v: 1 for v in order}
    for v in reversed(order):
        if parent[v] is not None:
            size[parent[v]] += size[v]
    return size
