"""Core membership by exhaustive coalition search."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterator

from .lp.game import as_payoff, deviation_margin
from .model import (
    UNBOUNDED,
    Flow,
    GameInstance,
    as_fraction,
    flow_to_dict,
    format_rational,
)

__all__ = [
    "Breakaway",
    "CoreVerdict",
    "SubsetBudgetExceeded",
    "GENERAL_LIMIT",
    "candidate_coalitions",
    "verify_core",
    "verify_approx_core",
    "scale_instance",
]

GENERAL_LIMIT = 12


class SubsetBudgetExceeded(RuntimeError):
    """Too many nodes to enumerate connected coalitions."""


@dataclass(frozen=True)
class Breakaway:
    S: tuple
    flow: Flow
    margin: Fraction


@dataclass(frozen=True)
class CoreVerdict:
    in_core: bool
    breakaway: Breakaway | None
    coalitions_checked: int

    def __bool__(self):
        return self.in_core

    def to_dict(self) -> dict:
        out = {"in_core": self.in_core, "coalitions_checked": self.coalitions_checked}
        if self.breakaway is not None:
            out["breakaway"] = {
                "S": list(self.breakaway.S),
                "flow": flow_to_dict(self.breakaway.flow),
                "margin": format_rational(self.breakaway.margin),
            }
        return out


def _connected(instance, S) -> bool:
    S = set(S)
    start = next(iter(S))
    seen, stack = {start}, [start]
    adj = instance.adjacency
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w in S and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(S)


def candidate_coalitions(instance: GameInstance, limit: int = GENERAL_LIMIT) -> Iterator[tuple]:
    """Proper coalitions that suffice for core checks, by size then lexicographically.

    A deviating flow lives in ``G[S]``, so one of its connected components
    already deviates; only connected coalitions need testing.  On a path
    those are the intervals.
    """
    n = instance.n
    if instance.topology == "path":
        order = instance.path_order
        for size in range(1, n):
            spans = [tuple(sorted(order[i : i + size])) for i in range(n - size + 1)]
            yield from sorted(spans)
        return
    if n > limit:
        raise SubsetBudgetExceeded(f"{n} nodes exceeds the enumeration limit of {limit}")
    for size in range(1, n):
        for S in combinations(instance.nodes, size):
            if _connected(instance, S):
                yield S


def _relevant(instance, S) -> bool:
    # a coalition with no internal demand cannot raise anyone's payoff
    return any(k[0] in S and k[1] in S and d > 0 for k, d in instance.demands.items())


def verify_approx_core(instance: GameInstance, flow, factor=1, limit: int = GENERAL_LIMIT) -> CoreVerdict:
    """Search for a coalition that strictly beats ``factor × payoff`` for all members.

    ``flow`` is a :class:`Flow` or a payoff vector.  Returns the first
    breakaway in (size, lexicographic) order.
    """
    factor = as_fraction(factor)
    if factor < 1:
        raise ValueError("approximation factor must be at least 1")
    pay = as_payoff(instance, flow)
    checked = 0
    for S in candidate_coalitions(instance, limit):
        checked += 1
        if not _relevant(instance, S):
            continue
        res = deviation_margin(instance, pay, S, scale=factor)
        if res.margin > 0:
            return CoreVerdict(False, Breakaway(tuple(S), res.witness, res.margin), checked)
    return CoreVerdict(True, None, checked)


def verify_core(instance: GameInstance, flow, limit: int = GENERAL_LIMIT) -> CoreVerdict:
    """Exact core membership of a flow's payoff (or a payoff vector)."""
    return verify_approx_core(instance, flow, 1, limit)


def scale_instance(instance: GameInstance, factor) -> GameInstance:
    """Copy with every finite capacity and every demand multiplied by ``factor``."""
    factor = as_fraction(factor)
    if not 0 < factor <= 1:
        raise ValueError("scale factor must lie in (0, 1]")
    cap = {v: (c if c is UNBOUNDED else c * factor) for v, c in instance.capacity.items()}
    dem = {k: d * factor for k, d in instance.demands.items()}
    return GameInstance(
        instance.nodes,
        instance.edges,
        cap,
        dem,
        topology=instance.topology,
        root=instance.root,
        check_connected=instance.check_connected,
    )
