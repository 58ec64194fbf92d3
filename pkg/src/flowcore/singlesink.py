"""Single-sink games and the fairness/welfare compromises built on them.

Every commodity ends at a common sink ``t``.  Routable throughput vectors
then form a polymatroid, so a greedy max-flow computation yields flows that
are simultaneously welfare-optimal, fairness-optimal and in the core.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .incorporate import incorporate, incorporate_spider
from .lp.game import demand_incident, fairness_lp
from .model import (
    UNBOUNDED,
    Flow,
    GameInstance,
    StructureError,
    as_fraction,
    classify_topology,
    commodity_key,
    format_rational,
    instance_from_dict,
    instance_to_dict,
    is_feasible,
    payoff,
)
from .verify import scale_instance

__all__ = [
    "SingleSinkInstance",
    "MinCut",
    "MaxFlowResult",
    "max_flow_node_cap",
    "polymatroid_greedy",
    "fair_throttle",
    "fair_core_flow",
    "core_check_single_sink",
    "BicriteriaResult",
    "bicriteria",
    "single_sink_to_dict",
    "single_sink_from_dict",
]


@dataclass(frozen=True)
class SingleSinkInstance:
    """A game whose commodities all join a terminal ``s_i`` to ``sink``."""

    base: GameInstance
    sink: int

    def __post_init__(self):
        if self.sink not in self.base.capacity:
            raise StructureError(f"sink {self.sink} is not a node")
        for u, v in self.base.demands:
            if self.sink not in (u, v):
                raise StructureError(f"commodity {u}-{v} does not use the sink")

    @classmethod
    def build(cls, base_nodes, edges, capacity: Mapping, sink: int, terminals: Mapping, **kw) -> "SingleSinkInstance":
        """Construct from ``terminals = {s_i: d_i}``; topology is classified from ``edges``."""
        demands = {commodity_key(s, sink): as_fraction(d) for s, d in terminals.items()}
        if len(demands) != len(terminals):
            raise StructureError("terminals must be distinct")
        topo, root = classify_topology(tuple(base_nodes), tuple(edges))
        base = GameInstance(tuple(base_nodes), tuple(edges), dict(capacity), demands, topology=topo, root=root, **kw)
        return cls(base, sink)

    @property
    def terminals(self) -> tuple:
        """``((s_i, d_i), ...)`` sorted by terminal id."""
        t = self.sink
        return tuple(sorted((u if v == t else v, d) for (u, v), d in self.base.demands.items()))

    def key(self, s: int) -> tuple:
        return commodity_key(s, self.sink)

    def throughput(self, flow: Flow) -> dict:
        """``{s_i: x_i}``: flow routed for each terminal."""
        amounts = flow.amounts
        return {s: amounts.get(self.key(s), Fraction(0)) for s, _ in self.terminals}


@dataclass(frozen=True)
class MinCut:
    """Node cut plus the source arcs it severs; ``capacity`` equals the max-flow value."""

    nodes: frozenset
    sources: frozenset
    capacity: Fraction


@dataclass(frozen=True)
class MaxFlowResult:
    value: Fraction
    flow: Flow
    x: dict
    cut: MinCut


class _Network:
    """Node-split residual network with a super-source.

    Node ``v`` becomes ``in(v) -> out(v)`` with capacity ``c_v``; each supply
    edge becomes two unbounded arcs ``out(a) -> in(b)`` and ``out(b) -> in(a)``.
    The sink is ``out(t)``.  ``None`` stands for unbounded capacity.
    """

    def __init__(self, instance: GameInstance, sink: int):
        self.instance = instance
        self.sink_node = sink
        nodes = instance.nodes
        self.vid = {v: i for i, v in enumerate(nodes)}
        self.count = 2 * len(nodes) + 1
        self.src = self.count - 1
        self.head, self.cap, self.flow, self.adj = [], [], [], [[] for _ in range(self.count)]
        self.node_arc = {}
        for v in nodes:
            c = instance.capacity[v]
            self.node_arc[v] = self._arc(self._in(v), self._out(v), None if c is UNBOUNDED else c)
        for a, b in instance.edges:
            self._arc(self._out(a), self._in(b), None)
            self._arc(self._out(b), self._in(a), None)
        self.source_arc = {}
        self.target = self._out(sink)

    def _in(self, v):
        return 2 * self.vid[v]

    def _out(self, v):
        return 2 * self.vid[v] + 1

    def _arc(self, u, w, cap):
        i = len(self.head)
        self.head += [w, u]
        self.cap += [cap, Fraction(0)]
        self.flow += [Fraction(0), Fraction(0)]
        self.adj[u].append(i)
        self.adj[w].append(i + 1)
        return i

    def residual(self, a):
        c = self.cap[a]
        return None if c is None else c - self.flow[a]

    def set_source_cap(self, s, cap):
        if s not in self.source_arc:
            self.source_arc[s] = self._arc(self.src, self._in(s), cap)
        else:
            a = self.source_arc[s]
            if cap is not None and cap < self.flow[a]:
                raise ValueError("source capacity below current throughput")
            self.cap[a] = cap

    def _bfs(self):
        prev = {self.src: None}
        queue = deque([self.src])
        while queue:
            u = queue.popleft()
            for a in self.adj[u]:
                w = self.head[a]
                if w in prev:
                    continue
                r = self.residual(a)
                if r is not None and r <= 0:
                    continue
                prev[w] = a
                if w == self.target:
                    return prev
                queue.append(w)
        return prev

    def augment(self) -> Fraction:
        """Shortest augmenting paths until none remain; returns the added value."""
        added = Fraction(0)
        while True:
            prev = self._bfs()
            if self.target not in prev:
                return added
            arcs, w = [], self.target
            while prev[w] is not None:
                a = prev[w]
                arcs.append(a)
                w = self.head[a ^ 1]
            amounts = [self.residual(a) for a in arcs]
            finite = [r for r in amounts if r is not None]
            if not finite:
                raise ValueError("maximum flow is unbounded")
            delta = min(finite)
            for a in arcs:
                self.flow[a] += delta
                self.flow[a ^ 1] -= delta
            added += delta

    def throughput(self) -> dict:
        return {s: self.flow[a] for s, a in self.source_arc.items()}

    def value(self) -> Fraction:
        return sum(self.throughput().values(), Fraction(0))

    def decompose(self) -> Flow:
        """Split the arc flow into source-to-sink node paths (cycles are dropped)."""
        rest = {a: self.flow[a] for a in range(0, len(self.head), 2) if self.flow[a] > 0}
        node_of = {}
        for v in self.instance.nodes:
            node_of[self._in(v)] = v
        t = self.sink_node
        out = {}
        while True:
            prev = {self.src: None}
            queue = deque([self.src])
            while queue and self.target not in prev:
                u = queue.popleft()
                for a in self.adj[u]:
                    if a % 2 or rest.get(a, 0) <= 0:
                        continue
                    w = self.head[a]
                    if w not in prev:
                        prev[w] = a
                        queue.append(w)
            if self.target not in prev:
                return Flow(out)
            arcs, w = [], self.target
            while prev[w] is not None:
                arcs.append(prev[w])
                w = self.head[prev[w] ^ 1]
            arcs.reverse()
            delta = min(rest[a] for a in arcs)
            for a in arcs:
                rest[a] -= delta
            path = tuple(node_of[self.head[a]] for a in arcs if self.head[a] in node_of)
            key = commodity_key(path[0], t)
            oriented = path if path[0] == key[0] else path[::-1]
            out[(key, oriented)] = out.get((key, oriented), 0) + delta

    def min_cut(self) -> MinCut:
        prev = self._bfs_all()
        nodes = frozenset(v for v, a in self.node_arc.items() if self._in(v) in prev and self._out(v) not in prev)
        sources = frozenset(s for s, a in self.source_arc.items() if self._in(s) not in prev)
        cap = sum((self.cap[self.node_arc[v]] for v in nodes), Fraction(0))
        cap += sum((self.cap[self.source_arc[s]] for s in sources), Fraction(0))
        return MinCut(nodes, sources, cap)

    def _bfs_all(self):
        seen = {self.src}
        queue = deque([self.src])
        while queue:
            u = queue.popleft()
            for a in self.adj[u]:
                w = self.head[a]
                r = self.residual(a)
                if w in seen or (r is not None and r <= 0):
                    continue
                seen.add(w)
                queue.append(w)
        return seen


def _source_caps(sources: Mapping) -> dict:
    return {s: (None if c is UNBOUNDED or c is None else as_fraction(c)) for s, c in sources.items()}


def max_flow_node_cap(instance: GameInstance, sources: Mapping, sink: int) -> MaxFlowResult:
    """Exact maximum flow from ``sources`` (node → supply cap, or ``UNBOUNDED``)
    to ``sink`` under node capacities, with a minimum cut certificate.

    Each unit routed from ``s`` is reported as flow of commodity ``s–sink``,
    which must exist in ``instance.demands`` only if the flow is later
    evaluated as a game flow.
    """
    if sink not in instance.capacity:
        raise StructureError(f"sink {sink} is not a node")
    net = _Network(instance, sink)
    for s, c in _source_caps(sources).items():
        if s == sink:
            raise StructureError("a source cannot be the sink")
        net.set_source_cap(s, c)
    net.augment()
    cut = net.min_cut()
    value = net.value()
    if cut.capacity != value:
        raise AssertionError("max-flow/min-cut mismatch")
    return MaxFlowResult(value, net.decompose(), net.throughput(), cut)


def polymatroid_greedy(ssi: SingleSinkInstance, order: Sequence[int] | None = None, caps: Mapping | None = None) -> tuple:
    """Route terminals one at a time, each to its maximum without
    reducing earlier terminals.  ``caps`` defaults to the demands.

    Returns ``(x, flow)``.
    """
    demands = dict(ssi.terminals)
    order = list(order) if order is not None else sorted(demands)
    if sorted(order) != sorted(demands):
        raise StructureError("order must list every terminal once")
    caps = demands if caps is None else {s: as_fraction(caps[s]) for s in demands}
    for s in demands:
        if caps[s] < 0 or caps[s] > demands[s]:
            raise ValueError("terminal caps must lie between 0 and the demand")
    net = _Network(ssi.base, ssi.sink)
    for s in order:
        net.set_source_cap(s, caps[s])
        net.augment()
    return net.throughput(), net.decompose()


def _largest_tau(demands: Sequence, budget: Fraction, upper: Fraction) -> Fraction:
    """Largest ``tau <= upper`` with ``Σ min(tau, d) <= budget`` (sum is nondecreasing in tau)."""
    ds = sorted(demands)
    spent = Fraction(0)
    for i, d in enumerate(ds):
        active = len(ds) - i
        # on [prev d, d] the sum is spent + active·tau
        if spent + active * d > budget:
            return min(upper, (budget - spent) / active)
        spent += d
    return upper


def fair_throttle(ssi: SingleSinkInstance) -> Fraction:
    """Largest ``tau`` (at most the largest demand) such that every terminal
    can route ``min(tau, d_i)`` simultaneously.

    Newton iteration on cuts: a violated minimum cut at the current ``tau``
    bounds ``tau`` from above, and the next ``tau`` satisfies that cut exactly.
    """
    demands = dict(ssi.terminals)
    if not demands:
        raise ValueError("no terminals")
    tau = max(demands.values())
    seen = set()
    while True:
        net = _Network(ssi.base, ssi.sink)
        for s, d in demands.items():
            net.set_source_cap(s, min(tau, d))
        net.augment()
        target = sum((min(tau, d) for d in demands.values()), Fraction(0))
        if net.value() == target:
            return tau
        cut = net.min_cut()
        behind = frozenset(demands) - cut.sources
        sig = (cut.nodes, behind)
        if sig in seen:
            raise AssertionError("throttle search revisited a cut")
        seen.add(sig)
        budget = sum((ssi.base.capacity[v] for v in cut.nodes), Fraction(0))
        tau = _largest_tau([demands[s] for s in behind], budget, tau)


def fair_core_flow(ssi: SingleSinkInstance, order: Sequence[int] | None = None) -> tuple:
    """Core flow maximizing both total throughput and the minimum throughput.

    Phase 1 routes ``min(tau, d_i)`` for every terminal; phase 2 lifts the
    caps to the demands and augments to a maximum flow.  Returns
    ``(flow, x, tau)``.
    """
    tau = fair_throttle(ssi)
    demands = dict(ssi.terminals)
    order = list(order) if order is not None else sorted(demands)
    net = _Network(ssi.base, ssi.sink)
    for s in order:
        net.set_source_cap(s, min(tau, demands[s]))
        net.augment()
    x1 = net.throughput()
    if any(x1[s] != min(tau, demands[s]) for s in demands):
        raise AssertionError("throttled phase missed its targets")
    for s in order:
        net.set_source_cap(s, demands[s])
        net.augment()
    return net.decompose(), net.throughput(), tau


def core_check_single_sink(ssi: SingleSinkInstance, flow: Flow) -> bool:
    """Sufficient core test: the flow routes a maximum total throughput.

    Any breakaway must contain the sink, and a maximum flow leaves no
    coalition containing the sink able to improve everyone.
    """
    if not is_feasible(ssi.base, flow):
        raise ValueError("flow is infeasible")
    total = sum(ssi.throughput(flow).values(), Fraction(0))
    best = max_flow_node_cap(ssi.base, dict(ssi.terminals), ssi.sink).value
    return total == best


def _rescale_single_sink(ssi: SingleSinkInstance, factor) -> SingleSinkInstance:
    return SingleSinkInstance(scale_instance(ssi.base, factor), ssi.sink)


@dataclass(frozen=True)
class BicriteriaResult:
    """``flow = core_flow + lam · fair_flow`` with its payoff and the fairness target ``tau``."""

    flow: Flow
    payoff: tuple
    core_flow: Flow
    fair_flow: Flow
    tau: Fraction
    lam: Fraction

    @property
    def factor(self) -> Fraction:
        """Approximate-core factor ``1/(1-lam)``."""
        return 1 / (1 - self.lam)


def _default_core(instance):
    if isinstance(instance, SingleSinkInstance):
        return lambda ssi: fair_core_flow(ssi)[0]
    if instance.topology == "path":
        return lambda inst: incorporate(inst).flow
    if instance.topology == "spider":
        return incorporate_spider
    raise StructureError("no default core algorithm for general graphs")


def bicriteria(
    instance,
    lam,
    core_algorithm: Callable | None = None,
    fair_flow: Flow | None = None,
    eligible=None,
) -> BicriteriaResult:
    """Blend a core flow of the ``(1-lam)``-scaled game with ``lam`` times a fair flow.

    ``instance`` is a :class:`GameInstance` or :class:`SingleSinkInstance`.
    ``fair_flow`` defaults to the fairness LP optimum over ``eligible``
    (terminals for single-sink games, demand-incident nodes otherwise).
    ``core_algorithm`` maps an instance of the same kind to a core flow.
    """
    lam = as_fraction(lam)
    if not 0 < lam < 1:
        raise ValueError("lambda must lie strictly between 0 and 1")
    single = isinstance(instance, SingleSinkInstance)
    base = instance.base if single else instance
    if core_algorithm is None:
        core_algorithm = _default_core(instance)
    if single and eligible is None:
        eligible = [s for s, _ in instance.terminals]
    if eligible is None:
        eligible = demand_incident(base)
    if fair_flow is None:
        if eligible:
            _, fair_flow = fairness_lp(base, eligible)
        else:
            fair_flow = Flow({})
    scaled = _rescale_single_sink(instance, 1 - lam) if single else scale_instance(base, 1 - lam)
    core = core_algorithm(scaled)
    flow = core + fair_flow.scaled(lam)
    pay_fair = payoff(base, fair_flow)
    idx = base.index
    tau = min((pay_fair[idx[v]] for v in eligible), default=Fraction(0))
    return BicriteriaResult(flow, payoff(base, flow), core, fair_flow, tau, lam)


def single_sink_to_dict(ssi: SingleSinkInstance) -> dict:
    out = instance_to_dict(ssi.base)
    out["sink"] = ssi.sink
    out["terminals"] = [{"s": s, "d": d} for s, d in ssi.terminals]
    for item in out["terminals"]:
        item["d"] = format_rational(item["d"])
    return out


def single_sink_from_dict(data: Mapping) -> SingleSinkInstance:
    """Read the base schema plus ``sink`` and ``terminals``; terminals
    supply the commodities when ``commodities`` is absent."""
    data = dict(data)
    sink = int(data.pop("sink"))
    terminals = data.pop("terminals", None)
    if terminals is not None and not data.get("commodities"):
        data["commodities"] = [{"u": t["s"], "v": sink, "d": t["d"]} for t in terminals]
    return SingleSinkInstance(instance_from_dict(data), sink)
