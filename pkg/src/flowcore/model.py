"""Game instances, flows, payoffs and feasibility for the node-capacitated
multicommodity flow game.

Nodes are integer ids.  Top-level instances use ``1..n`` in path order; induced
subgames keep the ids of the parent game.  All quantities are exact
``fractions.Fraction`` values, except that a capacity may be :data:`UNBOUNDED`.
"""

from __future__ import annotations

import functools
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

__all__ = [
    "UNBOUNDED",
    "Unbounded",
    "GameInstance",
    "Flow",
    "Feasibility",
    "StructureError",
    "as_fraction",
    "payoff",
    "is_feasible",
    "induced_subgame",
    "residual_capacities",
    "path_instance",
    "commodity_key",
    "simple_paths",
    "PathBudgetExceeded",
    "instance_to_dict",
    "instance_from_dict",
    "flow_to_dict",
    "flow_from_dict",
    "format_rational",
    "dumps_canonical",
    "load_instance",
]


class StructureError(ValueError):
    """An instance, flow or node set is malformed."""


class PathBudgetExceeded(RuntimeError):
    """Simple-path enumeration hit its hard cap."""


@functools.total_ordering
class Unbounded:
    """Infinite node capacity.

    Compares greater than every number; subtracting or adding a finite amount
    leaves it unchanged.  There is a single instance, :data:`UNBOUNDED`.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __str__(self):
        return "inf"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("flowcore-unbounded")

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __sub__(self, other):
        if other is self:
            raise ArithmeticError("inf - inf")
        return self

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __mul__(self, other):
        if other > 0:
            return self
        raise ArithmeticError("unbounded capacity scaled by non-positive factor")

    __rmul__ = __mul__

    def __rsub__(self, other):
        raise ArithmeticError("finite - inf")

    def __reduce__(self):
        return (Unbounded, ())


UNBOUNDED = Unbounded()

Capacity = Union[Fraction, Unbounded]
Key = tuple  # (u, v) with u < v
Path = tuple  # node ids from u to v


def as_fraction(x) -> Fraction:
    """Exact conversion of ints, Fractions, ``"p/q"`` and decimal strings.

    Non-integral floats go through their shortest ``repr`` so that ``0.1``
    becomes ``1/10`` rather than its binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if x.is_integer():
            return Fraction(int(x))
        return Fraction(repr(x))
    raise TypeError(f"cannot interpret {x!r} as a rational")


def _as_capacity(x) -> Capacity:
    if x is UNBOUNDED or (isinstance(x, str) and x.strip().lower() in ("inf", "infinity")):
        return UNBOUNDED
    if isinstance(x, float) and x == float("inf"):
        return UNBOUNDED
    return as_fraction(x)


def commodity_key(u: int, v: int) -> Key:
    if u == v:
        raise StructureError(f"commodity endpoints must differ, got {u}-{v}")
    return (u, v) if u < v else (v, u)


def _adjacency(nodes: Iterable[int], edges: Iterable[tuple]) -> dict:
    adj = {v: [] for v in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    for v in adj:
        adj[v].sort()
    return adj


def _components(adj: Mapping[int, list]) -> list:
    seen, comps = set(), []
    for s in sorted(adj):
        if s in seen:
            continue
        comp, queue = [], deque([s])
        seen.add(s)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def classify_topology(nodes: Sequence[int], edges: Sequence[tuple]) -> tuple:
    """Return ``(topology, root)`` for a supply graph.

    ``root`` is the unique node of degree > 2 for spiders and ``None``
    otherwise.  Disconnected graphs and graphs with cycles are ``"general"``.
    """
    adj = _adjacency(nodes, edges)
    if len(_components(adj)) > 1 or len(edges) != len(nodes) - 1:
        return "general", None
    high = [v for v in nodes if len(adj[v]) > 2]
    if not high:
        return "path", None
    if len(high) == 1:
        return "spider", high[0]
    return "general", None


@dataclass(frozen=True, eq=False)
class GameInstance:
    """A multicommodity flow game: supply graph, node capacities, demands.

    ``demands`` maps normalized commodity keys ``(u, v)`` with ``u < v`` to
    nonnegative demands.  ``topology`` is one of ``"path"``, ``"spider"``,
    ``"general"``; for spiders ``root`` is the branching node.  A path may
    carry a ``root`` too, which is then used as the spider root when the path
    is viewed as a two-legged spider.
    """

    nodes: tuple
    edges: tuple
    capacity: Mapping[int, Capacity]
    demands: Mapping[Key, Fraction]
    topology: str = "general"
    root: int | None = None
    check_connected: bool = field(default=True, repr=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if len(set(nodes)) != len(nodes) or not nodes:
            raise StructureError("node ids must be distinct and nonempty")
        node_set = set(nodes)
        edges = []
        for a, b in self.edges:
            if a == b or a not in node_set or b not in node_set:
                raise StructureError(f"bad supply edge {a}-{b}")
            edges.append((a, b) if a < b else (b, a))
        edges = tuple(sorted(set(edges)))
        cap = {}
        for v in nodes:
            if v not in self.capacity:
                raise StructureError(f"missing capacity for node {v}")
            c = _as_capacity(self.capacity[v])
            if c is not UNBOUNDED and c < 0:
                raise StructureError(f"negative capacity at node {v}")
            cap[v] = c
        dem = {}
        for (u, v), d in self.demands.items():
            key = commodity_key(u, v)
            if u not in node_set or v not in node_set:
                raise StructureError(f"commodity {u}-{v} has an endpoint outside the game")
            if key in dem:
                raise StructureError(f"duplicate commodity {key}")
            d = as_fraction(d)
            if d < 0:
                raise StructureError(f"negative demand on {key}")
            dem[key] = d
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "capacity", cap)
        object.__setattr__(self, "demands", dict(sorted(dem.items())))

        actual, branch = classify_topology(nodes, edges)
        if self.check_connected and len(_components(self.adjacency)) > 1:
            raise StructureError("supply graph is not connected")
        topo = self.topology
        if topo == "path":
            if actual != "path":
                raise StructureError("declared path but the supply graph is not a path")
            if self.root is not None and self.root not in node_set:
                raise StructureError("root is not a node")
        elif topo == "spider":
            if actual == "general":
                raise StructureError("declared spider but the supply graph is not a spider")
            if branch is not None and self.root != branch:
                raise StructureError(f"spider root must be the branching node {branch}")
            if self.root is None or self.root not in node_set:
                raise StructureError("spider needs a root node")
        elif topo != "general":
            raise StructureError(f"unknown topology {topo!r}")

    # -- graph helpers ----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.nodes)

    @functools.cached_property
    def adjacency(self) -> dict:
        return _adjacency(self.nodes, self.edges)

    @functools.cached_property
    def index(self) -> dict:
        """Position of each node id in :attr:`nodes` (payoff tuple index)."""
        return {v: i for i, v in enumerate(self.nodes)}

    @property
    def commodities(self) -> list:
        return list(self.demands)

    @property
    def is_tree(self) -> bool:
        return self.topology in ("path", "spider") or (
            len(self.edges) == len(self.nodes) - 1 and len(_components(self.adjacency)) == 1
        )

    @functools.cached_property
    def path_order(self) -> tuple:
        """Nodes in order along the path, starting at the smaller-id end."""
        if self.topology != "path":
            raise StructureError("path order is only defined for path topology")
        if self.n == 1:
            return self.nodes
        ends = sorted(v for v in self.nodes if len(self.adjacency[v]) == 1)
        order, prev = [ends[0]], None
        while len(order) < self.n:
            cur = order[-1]
            nxt = [w for w in self.adjacency[cur] if w != prev]
            prev = cur
            order.append(nxt[0])
        return tuple(order)

    @functools.cached_property
    def position(self) -> dict:
        return {v: i for i, v in enumerate(self.path_order)}

    @functools.cached_property
    def _tree_parent(self) -> tuple:
        # BFS tree per component, rooted at the smallest id
        parent, depth = {}, {}
        for comp in _components(self.adjacency):
            r = comp[0]
            parent[r], depth[r] = None, 0
            queue = deque([r])
            while queue:
                u = queue.popleft()
                for w in self.adjacency[u]:
                    if w not in depth:
                        parent[w], depth[w] = u, depth[u] + 1
                        queue.append(w)
        return parent, depth

    def tree_path(self, u: int, v: int) -> Path | None:
        """The unique u-v path in a forest, or ``None`` if disconnected."""
        if not self.is_forest:
            raise StructureError("unique paths need an acyclic supply graph")
        cache = self._path_cache
        if (u, v) not in cache:
            cache[(u, v)] = self._walk_tree(u, v)
        return cache[(u, v)]

    @functools.cached_property
    def is_forest(self) -> bool:
        return len(self.edges) == len(self.nodes) - len(_components(self.adjacency))

    @functools.cached_property
    def _path_cache(self) -> dict:
        return {}

    @functools.cached_property
    def _dist_cache(self) -> dict:
        return {}

    def _walk_tree(self, u, v):
        parent, depth = self._tree_parent
        left, right = [u], [v]
        a, b = u, v
        while depth[a] > depth[b]:
            a = parent[a]
            left.append(a)
        while depth[b] > depth[a]:
            b = parent[b]
            right.append(b)
        while a != b:
            a, b = parent[a], parent[b]
            if a is None or b is None:
                return None
            left.append(a)
            right.append(b)
        right.pop()
        return tuple(left + right[::-1])

    def distance(self, u: int, v: int) -> int:
        """Hop distance in the supply graph (BFS)."""
        return self._distances(u)[v]

    def _distances(self, s):
        if s in self._dist_cache:
            return self._dist_cache[s]
        dist = {s: 0}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for w in self.adjacency[x]:
                if w not in dist:
                    dist[w] = dist[x] + 1
                    queue.append(w)
        self._dist_cache[s] = dist
        return dist

    def commodity_paths(self, key: Key, limit: int = 10_000) -> list:
        """All simple paths for a commodity, unique for forests."""
        u, v = key
        if self.is_forest:
            p = self.tree_path(u, v)
            return [] if p is None else [p]
        return simple_paths(self.adjacency, u, v, limit=limit)

    def incident(self, v: int) -> list:
        return [k for k in self.demands if v in k]

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        if not isinstance(other, GameInstance):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.edges == other.edges
            and self.capacity == other.capacity
            and self.demands == other.demands
            and self.topology == other.topology
            and self.root == other.root
        )

    def __repr__(self):
        return (
            f"GameInstance(n={self.n}, topology={self.topology!r}, root={self.root}, "
            f"commodities={len(self.demands)})"
        )


def simple_paths(adj: Mapping[int, list], u: int, v: int, allowed=None, limit: int = 10_000) -> list:
    """Enumerate simple u-v paths (DFS, lexicographic by neighbor id).

    Raises :class:`PathBudgetExceeded` once more than ``limit`` paths exist.
    """
    if allowed is not None and (u not in allowed or v not in allowed):
        return []
    out = []
    stack = [(u, iter(adj[u]))]
    on_path = [u]
    visiting = {u}
    while stack:
        node, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            visiting.discard(on_path.pop())
            continue
        if nxt in visiting or (allowed is not None and nxt not in allowed):
            continue
        if nxt == v:
            out.append(tuple(on_path) + (v,))
            if len(out) > limit:
                raise PathBudgetExceeded(f"more than {limit} simple paths between {u} and {v}")
            continue
        visiting.add(nxt)
        on_path.append(nxt)
        stack.append((nxt, iter(adj[nxt])))
    return out


def path_instance(capacity: Sequence, demands: Mapping, root: int | None = None) -> GameInstance:
    """Path ``1-2-...-n`` with capacities listed in node order."""
    n = len(capacity)
    return GameInstance(
        nodes=tuple(range(1, n + 1)),
        edges=tuple((i, i + 1) for i in range(1, n)),
        capacity={i + 1: c for i, c in enumerate(capacity)},
        demands=dict(demands),
        topology="path",
        root=root,
    )


# -- flows -----------------------------------------------------------------


@dataclass(frozen=True)
class Flow:
    """Path flow: ``{(commodity key, node path): amount}`` with positive amounts.

    Paths run from the smaller commodity endpoint to the larger one.  For
    forests every commodity has one path, so :meth:`from_amounts` builds a
    flow from per-commodity amounts.
    """

    paths: Mapping[tuple, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (key, path), amt in self.paths.items():
            amt = as_fraction(amt)
            if amt < 0:
                raise StructureError(f"negative flow on {key}")
            key = commodity_key(*key)
            path = tuple(path)
            if path[0] != key[0]:
                path = path[::-1]
            if path[0] != key[0] or path[-1] != key[1]:
                raise StructureError(f"path {path} does not join {key}")
            if amt:
                clean[(key, path)] = clean.get((key, path), 0) + amt
        object.__setattr__(self, "paths", dict(sorted(clean.items())))

    @classmethod
    def from_amounts(cls, instance: GameInstance, amounts: Mapping) -> "Flow":
        out = {}
        for (u, v), amt in amounts.items():
            key = commodity_key(u, v)
            if key not in instance.demands:
                raise StructureError(f"unknown commodity {key}")
            if as_fraction(amt) == 0:
                continue
            path = instance.tree_path(*key)
            if path is None:
                raise StructureError(f"no supply path for {key}")
            out[(key, path)] = amt
        return cls(out)

    @property
    def amounts(self) -> dict:
        """Total flow per commodity (commodities with zero flow omitted)."""
        out = {}
        for (key, _), amt in self.paths.items():
            out[key] = out.get(key, 0) + amt
        return out

    def amount(self, key: Key) -> Fraction:
        return self.amounts.get(commodity_key(*key), Fraction(0))

    def positive_paths(self) -> Iterator[tuple]:
        """Yield ``(key, path, amount)`` for every positive flow path."""
        for (key, path), amt in self.paths.items():
            yield key, path, amt

    def __add__(self, other: "Flow") -> "Flow":
        out = dict(self.paths)
        for k, a in other.paths.items():
            out[k] = out.get(k, 0) + a
        return Flow(out)

    def scaled(self, factor) -> "Flow":
        factor = as_fraction(factor)
        return Flow({k: a * factor for k, a in self.paths.items()})

    def total(self) -> Fraction:
        return sum(self.paths.values(), Fraction(0))

    def __le__(self, other: "Flow") -> bool:
        return all(other.paths.get(k, 0) >= a for k, a in self.paths.items())


class Feasibility(NamedTuple):
    ok: bool
    violation: str | None = None

    def __bool__(self):
        return self.ok


def _check_structure(instance: GameInstance, flow: Flow) -> None:
    adj = instance.adjacency
    for key, path in flow.paths:
        if key not in instance.demands:
            raise StructureError(f"unknown commodity {key}")
        for a, b in zip(path, path[1:]):
            if b not in adj.get(a, ()):
                raise StructureError(f"path {path} uses a non-edge {a}-{b}")
        if len(set(path)) != len(path):
            raise StructureError(f"path {path} is not simple")


def payoff(instance: GameInstance, flow: Flow) -> tuple:
    """Payoff tuple in ``instance.nodes`` order.

    Each unit of flow on commodity ``uv`` credits both ``u`` and ``v``.
    """
    _check_structure(instance, flow)
    pay = [Fraction(0)] * instance.n
    idx = instance.index
    for (u, v), amt in flow.amounts.items():
        pay[idx[u]] += amt
        pay[idx[v]] += amt
    return tuple(pay)


def node_usage(instance: GameInstance, flow: Flow) -> dict:
    use = {v: Fraction(0) for v in instance.nodes}
    for (_, path), amt in flow.paths.items():
        for x in path:
            use[x] += amt
    return use


def residual_capacities(instance: GameInstance, flow: Flow) -> dict:
    """Capacity left at every node after ``flow``; unbounded stays unbounded."""
    use = node_usage(instance, flow)
    return {v: instance.capacity[v] - use[v] for v in instance.nodes}


def is_feasible(instance: GameInstance, flow: Flow) -> Feasibility:
    """Check capacity and demand constraints exactly.

    Returns a :class:`Feasibility` that is falsy when a constraint fails, with
    a description of the first violation found (capacities first).
    """
    _check_structure(instance, flow)
    use = node_usage(instance, flow)
    for v in instance.nodes:
        if use[v] > instance.capacity[v]:
            return Feasibility(False, f"capacity at node {v}: {use[v]} > {instance.capacity[v]}")
    for key, amt in flow.amounts.items():
        if amt > instance.demands[key]:
            return Feasibility(False, f"demand of {key[0]}-{key[1]}: {amt} > {instance.demands[key]}")
    return Feasibility(True)


def induced_subgame(instance: GameInstance, S: Iterable[int]) -> GameInstance:
    """The game on ``G[S]`` with commodities having both endpoints in ``S``.

    The supply graph of the result may be disconnected; its topology is
    reclassified (a disconnected subgraph counts as ``"general"``).
    """
    S = set(S)
    if not S:
        raise StructureError("coalition must be nonempty")
    if not S <= set(instance.nodes):
        raise StructureError("coalition contains unknown nodes")
    nodes = tuple(v for v in instance.nodes if v in S)
    edges = tuple(e for e in instance.edges if e[0] in S and e[1] in S)
    demands = {k: d for k, d in instance.demands.items() if k[0] in S and k[1] in S}
    topo, branch = classify_topology(nodes, edges)
    root = None
    if topo == "spider":
        root = branch
    elif topo == "path" and instance.root in S:
        root = instance.root
    return GameInstance(
        nodes=nodes,
        edges=edges,
        capacity={v: instance.capacity[v] for v in nodes},
        demands=demands,
        topology=topo,
        root=root,
        check_connected=False,
    )


# -- serialization ----------------------------------------------------------


def format_rational(x):
    """``int`` when integral, ``"p/q"`` otherwise, ``"inf"`` for unbounded."""
    if x is UNBOUNDED:
        return "inf"
    x = as_fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def instance_to_dict(instance: GameInstance) -> dict:
    if instance.nodes != tuple(range(1, instance.n + 1)):
        raise StructureError("only games on nodes 1..n are serializable")
    out = {
        "n": instance.n,
        "topology": instance.topology,
        "capacity": [format_rational(instance.capacity[v]) for v in instance.nodes],
        "commodities": [
            {"u": u, "v": v, "d": format_rational(d)} for (u, v), d in instance.demands.items()
        ],
    }
    if instance.root is not None:
        out["root"] = instance.root
    if instance.topology != "path" or instance.edges != tuple((i, i + 1) for i in range(1, instance.n)):
        out["edges"] = [list(e) for e in instance.edges]
    return out


def instance_from_dict(data: Mapping) -> GameInstance:
    n = int(data["n"])
    topo = data.get("topology", "general")
    if "edges" in data:
        edges = tuple(tuple(e) for e in data["edges"])
    elif topo == "path":
        edges = tuple((i, i + 1) for i in range(1, n))
    else:
        raise StructureError("edges are required unless topology is path")
    caps = data["capacity"]
    if len(caps) != n:
        raise StructureError(f"expected {n} capacities, got {len(caps)}")
    demands = {}
    for c in data.get("commodities", []):
        key = commodity_key(int(c["u"]), int(c["v"]))
        if key in demands:
            raise StructureError(f"duplicate commodity {key}")
        demands[key] = as_fraction(c["d"])
    return GameInstance(
        nodes=tuple(range(1, n + 1)),
        edges=edges,
        capacity={i + 1: caps[i] for i in range(n)},
        demands=demands,
        topology=topo,
        root=data.get("root"),
    )


def flow_to_dict(flow: Flow, with_paths: bool = True) -> dict:
    rows = []
    for (key, path), amt in flow.paths.items():
        row = {"u": key[0], "v": key[1], "amount": format_rational(amt)}
        if with_paths:
            row["path"] = list(path)
        rows.append(row)
    return {"flows": rows}


def flow_from_dict(data: Mapping, instance: GameInstance) -> Flow:
    paths = {}
    for row in data["flows"]:
        key = commodity_key(int(row["u"]), int(row["v"]))
        if "path" in row:
            path = tuple(int(x) for x in row["path"])
        else:
            path = instance.tree_path(*key)
            if path is None:
                raise StructureError(f"no supply path for {key}")
        paths[(key, path)] = paths.get((key, path), 0) + as_fraction(row["amount"])
    flow = Flow(paths)
    _check_structure(instance, flow)
    return flow


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def load_instance(path) -> GameInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh, parse_float=Fraction))
