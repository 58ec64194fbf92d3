"""Farkas certificates proving that a coalition cannot deviate.

A certificate for coalition ``S`` against payoff ``target`` is a triple
``y, z, w >= 0`` (node capacities, commodities of ``H[S]``, node payoffs)
with ``w != 0`` such that every commodity path ``P`` in ``G[S]`` satisfies
``y(P) + z_kl >= w_k + w_l`` and ``Σ y_v c_v + Σ z_kl d_kl <= Σ w_v target_v``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

from .lp.game import as_payoff, deviation_margin
from .model import (
    UNBOUNDED,
    Flow,
    GameInstance,
    StructureError,
    as_fraction,
    commodity_key,
    format_rational,
    node_usage,
    payoff,
)

__all__ = [
    "Certificate",
    "CertificateCheck",
    "CertifyResult",
    "Anchors",
    "InvalidCertificate",
    "implied_z",
    "check_certificate",
    "cert_globally_content",
    "cert_s_content",
    "check_precertificate",
    "anchors",
    "anchor_conditions",
    "cert_anchor",
    "certify_coalition",
    "tight_nodes",
]


class InvalidCertificate(ValueError):
    """A certificate that cannot even be evaluated (e.g. y on an unbounded node)."""


def _indicator(x) -> dict:
    if isinstance(x, Mapping):
        return {v: as_fraction(a) for v, a in x.items() if a}
    return {v: Fraction(1) for v in x}


@dataclass(frozen=True)
class Certificate:
    """Multipliers ``y`` (nodes), ``w`` (nodes) and ``z`` (commodities) for coalition ``S``."""

    S: frozenset
    y: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "S", frozenset(self.S))
        object.__setattr__(self, "y", _indicator(self.y))
        object.__setattr__(self, "w", _indicator(self.w))
        object.__setattr__(self, "z", {commodity_key(*k): as_fraction(a) for k, a in self.z.items() if a})

    @property
    def Y(self) -> frozenset:
        return frozenset(self.y)

    @property
    def W(self) -> frozenset:
        return frozenset(self.w)

    @property
    def is_binary(self) -> bool:
        return all(a == 1 for a in self.y.values()) and all(a == 1 for a in self.w.values())

    def to_dict(self) -> dict:
        out = {
            "S": sorted(self.S),
            "Y": sorted(self.Y),
            "W": sorted(self.W),
            "z": {f"{k}-{l}": format_rational(a) for (k, l), a in sorted(self.z.items())},
        }
        if not self.is_binary:
            out["y"] = {str(v): format_rational(a) for v, a in sorted(self.y.items())}
            out["w"] = {str(v): format_rational(a) for v, a in sorted(self.w.items())}
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Certificate":
        z = {}
        for k, a in data.get("z", {}).items():
            u, v = k.split("-")
            z[(int(u), int(v))] = as_fraction(a)
        if "y" in data or "w" in data:
            y = {int(v): as_fraction(a) for v, a in data.get("y", {}).items()}
            w = {int(v): as_fraction(a) for v, a in data.get("w", {}).items()}
        else:
            y, w = set(data.get("Y", [])), set(data.get("W", []))
        return cls(frozenset(data["S"]), y, w, z)


class CertificateCheck(NamedTuple):
    ok: bool
    failure: str | None = None

    def __bool__(self):
        return self.ok


def _min_path_weight(instance: GameInstance, S: frozenset, y: Mapping, source: int) -> dict:
    """Node-weighted shortest distances from ``source`` inside ``G[S]``."""
    adj = instance.adjacency
    dist = {source: y.get(source, Fraction(0))}
    heap = [(dist[source], source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for w in adj[u]:
            if w not in S or w in done:
                continue
            nd = d + y.get(w, Fraction(0))
            if w not in dist or nd < dist[w]:
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def _h_s(instance: GameInstance, S) -> list:
    return [k for k in instance.demands if k[0] in S and k[1] in S]


def implied_z(instance: GameInstance, S: Iterable[int], y, w) -> dict:
    """Smallest ``z`` compatible with ``y, w``: for each commodity ``kl`` of
    ``H[S]``, ``max(0, w_k + w_l - min_P y(P))`` over ``kl``-paths in ``G[S]``.

    ``y`` and ``w`` are node sets (indicators) or node → weight mappings.
    """
    S = frozenset(S)
    y, w = _indicator(y), _indicator(w)
    out = {}
    dist_cache = {}
    for key in _h_s(instance, S):
        k, l = key
        if k not in dist_cache:
            dist_cache[k] = _min_path_weight(instance, S, y, k)
        best = dist_cache[k].get(l)
        if best is None:
            continue
        val = w.get(k, 0) + w.get(l, 0) - best
        if val > 0:
            out[key] = val
    return out


def check_certificate(instance: GameInstance, target, cert: Certificate, scale=1) -> CertificateCheck:
    """Exactly verify ``cert`` for coalition ``cert.S`` against ``scale × payoff``.

    ``target`` is a :class:`Flow` or payoff vector.  A passing certificate
    proves that ``S`` has no deviation.
    """
    S = cert.S
    nodes = set(instance.nodes)
    if not S or not S <= nodes:
        raise InvalidCertificate("coalition must be a nonempty set of nodes")
    for name, vec in (("y", cert.y), ("w", cert.w)):
        for v, a in vec.items():
            if v not in S:
                return CertificateCheck(False, f"{name} has support outside S at node {v}")
            if a < 0:
                return CertificateCheck(False, f"{name} is negative at node {v}")
    for v in cert.y:
        if instance.capacity[v] is UNBOUNDED:
            raise InvalidCertificate(f"y selects unbounded-capacity node {v}")
    hs = set(_h_s(instance, S))
    for key, a in cert.z.items():
        if key not in hs:
            return CertificateCheck(False, f"z has commodity {key} outside H[S]")
        if a < 0:
            return CertificateCheck(False, f"z is negative on {key}")
    if not cert.w:
        return CertificateCheck(False, "w is zero")

    dist_cache = {}
    for key in sorted(hs):
        k, l = key
        if k not in dist_cache:
            dist_cache[k] = _min_path_weight(instance, S, cert.y, k)
        best = dist_cache[k].get(l)
        if best is None:
            continue
        if best + cert.z.get(key, 0) < cert.w.get(k, 0) + cert.w.get(l, 0):
            return CertificateCheck(False, f"path constraint fails for commodity {k}-{l}")

    pay = as_payoff(instance, target)
    idx = instance.index
    scale = as_fraction(scale)
    cost = sum((a * instance.capacity[v] for v, a in cert.y.items()), Fraction(0))
    cost += sum((a * instance.demands[key] for key, a in cert.z.items()), Fraction(0))
    gain = sum((a * scale * pay[idx[v]] for v, a in cert.w.items()), Fraction(0))
    if cost > gain:
        return CertificateCheck(False, f"charging fails: yc + zd = {cost} > w.target = {gain}")
    return CertificateCheck(True)


def tight_nodes(instance: GameInstance, flow: Flow) -> set:
    """Nodes whose finite capacity is fully used; unbounded nodes are never tight."""
    use = node_usage(instance, flow)
    return {v for v in instance.nodes if instance.capacity[v] is not UNBOUNDED and use[v] == instance.capacity[v]}


def _binary(instance, S, Y, W) -> Certificate:
    return Certificate(S, set(Y), set(W), implied_z(instance, S, Y, W))


def cert_globally_content(instance: GameInstance, flow: Flow, S: Iterable[int]) -> Certificate | None:
    """``Y = W = {v}`` for a node of ``S`` whose payoff equals its finite capacity."""
    S = frozenset(S)
    pay = payoff(instance, flow)
    idx = instance.index
    for v in sorted(S):
        c = instance.capacity[v]
        if c is not UNBOUNDED and pay[idx[v]] == c:
            return _binary(instance, S, {v}, {v})
    return None


def cert_s_content(instance: GameInstance, flow: Flow, S: Iterable[int]) -> Certificate | None:
    """``Y = ∅, W = {v}`` for a node already receiving all of its demand inside ``S``."""
    S = frozenset(S)
    pay = payoff(instance, flow)
    idx = instance.index
    for v in sorted(S):
        inside = sum((d for key, d in instance.demands.items() if v in key and key[0] in S and key[1] in S), Fraction(0))
        if pay[idx[v]] >= inside:
            return _binary(instance, S, set(), {v})
    return None


def _connected_avoiding(instance, S, blocked, a, b) -> bool:
    if a in blocked or b in blocked:
        return False
    adj = instance.adjacency
    seen, stack = {a}, [a]
    while stack:
        u = stack.pop()
        if u == b:
            return True
        for w in adj[u]:
            if w in S and w not in blocked and w not in seen:
                seen.add(w)
                stack.append(w)
    return False


def check_precertificate(instance: GameInstance, flow: Flow, S, Y, W) -> dict:
    """Evaluate the four sufficient conditions for ``(Y, W)`` to extend to a certificate.

    Returns ``{"P1": bool, ..., "P4": bool}``.  ``P3`` is checked inside
    ``G[S]`` for commodities of ``H[S]``, the only ones a certificate for
    ``S`` involves.
    """
    S, Y, W = frozenset(S), frozenset(Y), frozenset(W)
    if not (Y <= W <= S):
        raise StructureError("need Y ⊆ W ⊆ S")
    tight = tight_nodes(instance, flow)
    if not Y <= tight:
        raise StructureError(f"Y contains non-tight nodes {sorted(Y - tight)}")
    amounts = flow.amounts
    full = {k for k, d in instance.demands.items() if amounts.get(k, 0) == d}
    p1 = all(k in full for k in instance.demands if k[0] in W and k[1] in W)
    p2 = True
    p4 = True
    for key, path, _ in flow.positive_paths():
        inner = set(path[1:-1])
        if inner & Y and not (key[0] in W or key[1] in W):
            p2 = False
        if len(set(path) & Y) > 1:
            p4 = False
    p3 = True
    for key in _h_s(instance, S):
        if key in full or not (key[0] in W or key[1] in W):
            continue
        if _connected_avoiding(instance, S, Y, *key):
            p3 = False
            break
    return {"P1": p1, "P2": p2, "P3": p3, "P4": p4}


class Anchors(NamedTuple):
    left: frozenset
    right: frozenset

    @property
    def all(self) -> frozenset:
        return self.left | self.right


def anchors(instance: GameInstance, flow: Flow, v: int) -> Anchors:
    """Endpoints of positive flow paths that pass through ``v`` as an inner node,
    split into those left and right of ``v`` along the path."""
    if instance.topology != "path":
        raise StructureError("anchors are defined on paths")
    pos = instance.position
    left, right = set(), set()
    for key, path, _ in flow.positive_paths():
        if v in path[1:-1]:
            for e in key:
                (left if pos[e] < pos[v] else right).add(e)
    return Anchors(frozenset(left), frozenset(right))


def _interval(instance, S):
    pos = instance.position
    ps = sorted(pos[v] for v in S)
    if ps != list(range(ps[0], ps[-1] + 1)):
        raise StructureError("coalition must be contiguous along the path")
    order = instance.path_order
    return order[ps[0]], order[ps[-1]]


def anchor_conditions(instance: GameInstance, flow: Flow, S, side: str = "left") -> dict | None:
    """Anchor construction for a contiguous ``S``: the extreme tight node on
    ``side``, its ``W`` set and the two gate conditions ``PA`` and ``PB``.

    Returns ``None`` when ``S`` has no tight node.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    S = frozenset(S)
    i, j = _interval(instance, S)
    pos = instance.position
    tight = sorted((v for v in tight_nodes(instance, flow) if v in S), key=pos.get)
    if not tight:
        return None
    v = tight[0] if side == "left" else tight[-1]
    anc = anchors(instance, flow, v)
    side_anchors = anc.left if side == "left" else anc.right
    pa = side_anchors <= S
    amounts = flow.amounts
    pb = True
    if side_anchors:
        if side == "left":
            extreme = min(side_anchors, key=pos.get)
            lo, hi = pos[i], pos[extreme]  # a ∈ [i, L')
        else:
            extreme = max(side_anchors, key=pos.get)
            lo, hi = pos[extreme] + 1, pos[j] + 1  # b ∈ (R', j]
        for key, d in instance.demands.items():
            if amounts.get(key, 0) == d:
                continue
            a, b = sorted(key, key=pos.get)
            if side == "left" and b in side_anchors and lo <= pos[a] < hi:
                pb = False
            if side == "right" and a in side_anchors and lo <= pos[b] < hi:
                pb = False
    return {"node": v, "Y": frozenset({v}), "W": side_anchors | {v}, "PA": pa, "PB": pb}


def cert_anchor(instance: GameInstance, flow: Flow, S, side: str = "left") -> Certificate | None:
    """Anchor-set certificate for a contiguous coalition, if PA and PB hold."""
    cond = anchor_conditions(instance, flow, S, side)
    if cond is None or not (cond["PA"] and cond["PB"]):
        return None
    return _binary(instance, frozenset(S), cond["Y"], cond["W"])


@dataclass(frozen=True)
class CertifyResult:
    """Either a passing ``certificate`` or a deviation ``witness`` for ``S``.

    ``method`` names the construction that succeeded: ``globally-content``,
    ``s-content``, ``span-positive``, ``anchor-left``, ``anchor-right``,
    ``farkas`` (LP dual) or ``deviation``.
    """

    S: frozenset
    method: str
    certificate: Certificate | None = None
    witness: Flow | None = None
    margin: Fraction | None = None


def _span_positive(instance, flow, S) -> bool:
    pos = instance.position
    lo = min(pos[v] for v in S)
    hi = max(pos[v] for v in S)
    return any(pos[k] <= lo and hi <= pos[l] for (k, l) in flow.amounts)


def certify_coalition(instance: GameInstance, flow: Flow, S) -> CertifyResult:
    """Certificate that ``S`` has no deviation from ``payoff(flow)``, or a deviation.

    Constructive certificates are tried first and each is re-checked with
    :func:`check_certificate`; the LP dual decides whatever they miss.
    """
    S = frozenset(S)
    candidates = [
        ("globally-content", lambda: cert_globally_content(instance, flow, S)),
        ("s-content", lambda: cert_s_content(instance, flow, S)),
    ]
    contiguous = False
    if instance.topology == "path":
        try:
            _interval(instance, S)
            contiguous = True
        except StructureError:
            pass
    if contiguous:
        candidates += [
            ("span-positive", lambda: _single_node_certificate(instance, flow, S) if _span_positive(instance, flow, S) else None),
            ("anchor-left", lambda: cert_anchor(instance, flow, S, "left")),
            ("anchor-right", lambda: cert_anchor(instance, flow, S, "right")),
        ]
    for method, build in candidates:
        cert = build()
        if cert is not None and check_certificate(instance, flow, cert):
            return CertifyResult(S, method, certificate=cert)

    res = deviation_margin(instance, flow, S)
    if res.margin > 0:
        return CertifyResult(S, "deviation", witness=res.witness, margin=res.margin)
    cert = Certificate(S, res.y, res.w, res.z)
    if not check_certificate(instance, flow, cert):
        raise AssertionError("LP dual failed to certify a coalition with non-positive margin")
    return CertifyResult(S, "farkas", certificate=cert, margin=res.margin)


def _single_node_certificate(instance, flow, S) -> Certificate | None:
    tight = tight_nodes(instance, flow)
    for v in sorted(S):
        options = [(set(), {v})] + ([({v}, {v})] if v in tight else [])
        for Y, W in options:
            cert = _binary(instance, S, Y, W)
            if check_certificate(instance, flow, cert):
                return cert
    return None
