"""The flow-game LPs: coalition deviation margin, social welfare, fairness."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from ..model import (
    UNBOUNDED,
    Flow,
    GameInstance,
    StructureError,
    as_fraction,
    payoff,
    simple_paths,
)
from .simplex import GE, LE, LinearProgram, LpOutcome, solve

__all__ = [
    "MarginResult",
    "as_payoff",
    "coalition_paths",
    "deviation_lp",
    "deviation_margin",
    "sw_lp",
    "fairness_lp",
    "fairness_feasible",
    "demand_incident",
    "PATH_LIMIT",
]

PATH_LIMIT = 10_000


def as_payoff(instance: GameInstance, target) -> tuple:
    """Payoff tuple from a :class:`Flow` or a per-node sequence/mapping."""
    if isinstance(target, Flow):
        return payoff(instance, target)
    if isinstance(target, dict):
        return tuple(as_fraction(target.get(v, 0)) for v in instance.nodes)
    target = tuple(as_fraction(x) for x in target)
    if len(target) != instance.n:
        raise StructureError(f"payoff has {len(target)} entries for {instance.n} nodes")
    return target


def coalition_paths(instance: GameInstance, S: Iterable[int], limit: int = PATH_LIMIT) -> list:
    """``[(key, path)]`` for every commodity of ``H[S]`` and simple path in ``G[S]``."""
    S = set(S)
    out = []
    for key in instance.demands:
        u, v = key
        if u not in S or v not in S:
            continue
        if instance.is_forest:
            p = instance.tree_path(u, v)
            if p is not None and all(x in S for x in p):
                out.append((key, p))
        else:
            for p in simple_paths(instance.adjacency, u, v, allowed=S, limit=limit):
                out.append((key, p))
    return out


def _flow_lp(instance, columns, nodes, extra_vars=0):
    """Capacity and demand rows over path columns; returns (rows, upper)."""
    rows, upper = [], [None] * (len(columns) + extra_vars)
    touching = {}
    by_key = {}
    for j, (key, path) in enumerate(columns):
        for x in path:
            touching.setdefault(x, {})[j] = 1
        by_key.setdefault(key, []).append(j)
    cap_rows = {}
    for v in nodes:
        c = instance.capacity[v]
        if c is UNBOUNDED or v not in touching:
            continue
        cap_rows[v] = len(rows)
        rows.append((touching[v], LE, c))
    dem_rows = {}
    for key, cols in by_key.items():
        d = instance.demands[key]
        if len(cols) == 1:
            upper[cols[0]] = d
        else:
            dem_rows[key] = len(rows)
            rows.append(({j: 1 for j in cols}, LE, d))
    return rows, upper, cap_rows, dem_rows, by_key


def _flow_from_point(columns, point) -> Flow:
    return Flow({col: point[j] for j, col in enumerate(columns) if point[j] > 0})


@dataclass(frozen=True)
class MarginResult:
    """Largest uniform improvement ``margin`` a coalition can get.

    ``witness`` is an improving flow in ``G[S]`` when ``margin > 0``.  The dual
    multipliers ``y`` (node capacities), ``z`` (commodities of ``H[S]``) and
    ``w`` (node payoffs, summing to 1) always satisfy the path constraints
    ``y(P) + z_kl >= w_k + w_l`` and ``yc + zd - w·target = margin``.
    """

    margin: Fraction
    witness: Flow | None
    y: dict
    z: dict
    w: dict
    outcome: LpOutcome

    @property
    def deviates(self) -> bool:
        return self.margin > 0


def deviation_lp(instance: GameInstance, target: Sequence, S: Iterable[int], limit: int = PATH_LIMIT):
    """Build ``max delta`` s.t. a flow in ``G[S]`` gives every ``v ∈ S`` at least ``target_v + delta``."""
    S = sorted(set(S))
    columns = coalition_paths(instance, S, limit)
    nvar = len(columns) + 1
    delta = nvar - 1
    rows, upper, cap_rows, dem_rows, by_key = _flow_lp(instance, columns, S, extra_vars=1)
    idx = instance.index
    pay_rows = {}
    ends = {v: {} for v in S}
    for j, (key, _) in enumerate(columns):
        ends[key[0]][j] = 1
        ends[key[1]][j] = 1
    for v in S:
        coef = dict(ends[v])
        coef[delta] = -1
        pay_rows[v] = len(rows)
        rows.append((coef, GE, target[idx[v]]))
    lower = [Fraction(0)] * nvar
    # f = 0 with delta = -max target is feasible, so this bound never binds at the optimum
    lower[delta] = -max(target[idx[v]] for v in S)
    objective = [0] * nvar
    objective[delta] = 1
    names = [f"f[{k[0]}-{k[1]}:{'.'.join(map(str, p))}]" for k, p in columns] + ["delta"]
    lp = LinearProgram(objective, rows, lower=lower, upper=upper, names=names)
    return lp, columns, cap_rows, dem_rows, pay_rows, by_key


def deviation_margin(
    instance: GameInstance,
    target,
    S: Iterable[int],
    scale=1,
    limit: int = PATH_LIMIT,
) -> MarginResult:
    """Best uniform margin by which coalition ``S`` can beat ``scale × target``.

    ``target`` is a :class:`Flow` or a payoff vector.  ``S`` deviates iff the
    returned margin is strictly positive.  ``scale > 1`` tests the
    approximate core.
    """
    S = set(S)
    if not S:
        raise StructureError("coalition must be nonempty")
    if S == set(instance.nodes):
        raise StructureError("coalition must be a proper subset")
    if not S <= set(instance.nodes):
        raise StructureError("coalition contains unknown nodes")
    scale = as_fraction(scale)
    pay = as_payoff(instance, target)
    pay = tuple(scale * p for p in pay)
    lp, columns, cap_rows, dem_rows, pay_rows, by_key = deviation_lp(instance, pay, S, limit)
    out = solve(lp, method="exact")
    if not out.optimal:
        raise AssertionError(f"deviation LP is always feasible and bounded, got {out.status}")
    margin = out.value
    witness = _flow_from_point(columns, out.point) if margin > 0 else None
    y = {v: out.dual[r] for v, r in cap_rows.items() if out.dual[r]}
    z = {}
    for key, cols in by_key.items():
        val = out.dual[dem_rows[key]] if key in dem_rows else out.bound_dual[cols[0]]
        if val:
            z[key] = val
    w = {v: -out.dual[r] for v, r in pay_rows.items() if out.dual[r]}
    return MarginResult(margin, witness, y, z, w, out)


def demand_incident(instance: GameInstance) -> list:
    """Nodes that are an endpoint of some positive-demand commodity."""
    out = set()
    for (u, v), d in instance.demands.items():
        if d > 0:
            out.update((u, v))
    return sorted(out)


def _all_columns(instance, limit):
    cols = []
    for key in instance.demands:
        for p in instance.commodity_paths(key, limit=limit):
            cols.append((key, p))
    return cols


def sw_lp(instance: GameInstance, limit: int = PATH_LIMIT, method: str = "auto") -> tuple:
    """Maximum social welfare ``Σ_v target_v`` (twice the total flow) and a witness flow."""
    columns = _all_columns(instance, limit)
    rows, upper, *_ = _flow_lp(instance, columns, instance.nodes)
    lp = LinearProgram([2] * len(columns), rows, upper=upper)
    out = solve(lp, method=method)
    if not out.optimal:
        raise AssertionError(f"social welfare LP is always feasible and bounded, got {out.status}")
    return out.value, _flow_from_point(columns, out.point)


def _fairness_program(instance, eligible, limit, tau=None):
    columns = _all_columns(instance, limit)
    extra = 0 if tau is not None else 1
    rows, upper, *_ = _flow_lp(instance, columns, instance.nodes, extra_vars=extra)
    ends = {v: {} for v in instance.nodes}
    for j, (key, _) in enumerate(columns):
        ends[key[0]][j] = 1
        ends[key[1]][j] = 1
    t = len(columns)
    for i in eligible:
        coef = dict(ends[i])
        if tau is None:
            coef[t] = -1
            rows.append((coef, GE, 0))
        else:
            rows.append((coef, GE, tau))
    objective = [0] * (len(columns) + extra)
    if tau is None:
        objective[t] = 1
    return LinearProgram(objective, rows, upper=upper), columns


def _eligible(instance, eligible):
    if eligible is None:
        eligible = demand_incident(instance)
    elif eligible == "all":
        eligible = list(instance.nodes)
    eligible = sorted(set(eligible))
    if not eligible:
        raise ValueError("fairness needs at least one eligible node")
    if not set(eligible) <= set(instance.nodes):
        raise StructureError("eligible set contains unknown nodes")
    return eligible


def fairness_lp(instance: GameInstance, eligible=None, limit: int = PATH_LIMIT, method: str = "auto") -> tuple:
    """Maximize the minimum payoff over ``eligible`` nodes.

    ``eligible`` defaults to the nodes incident to a positive-demand
    commodity; pass ``"all"`` for every node.  Returns ``(tau, flow)``.
    """
    eligible = _eligible(instance, eligible)
    lp, columns = _fairness_program(instance, eligible, limit)
    out = solve(lp, method=method)
    if not out.optimal:
        raise AssertionError(f"fairness LP is always feasible and bounded, got {out.status}")
    return out.value, _flow_from_point(columns, out.point)


def fairness_feasible(instance: GameInstance, tau, eligible=None, limit: int = PATH_LIMIT) -> bool:
    """Exact check that some feasible flow gives every eligible node at least ``tau``."""
    eligible = _eligible(instance, eligible)
    lp, _ = _fairness_program(instance, eligible, limit, tau=as_fraction(tau))
    return solve(lp).optimal
