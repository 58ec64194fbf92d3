"""Independent reference implementations used to cross-check the library.

Nothing here imports the code under test except plain data types, so an
agreement between an oracle and the library is real evidence.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations


# -- linear programming by vertex enumeration ---------------------------------


def _solve_square(rows, rhs):
    """Gauss-Jordan over Fractions; ``None`` when singular."""
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def _as_le(rows, rels, rhs):
    """Rewrite ``>=`` and ``=`` rows as ``<=`` rows."""
    out_a, out_b = [], []
    for a, rel, b in zip(rows, rels, rhs):
        a = [Fraction(x) for x in a]
        b = Fraction(b)
        if rel in ("<=", "="):
            out_a.append(a)
            out_b.append(b)
        if rel in (">=", "="):
            out_a.append([-x for x in a])
            out_b.append(-b)
    return out_a, out_b


def _best_vertex(A, b, c):
    """Max of ``c·x`` over vertices of ``{Ax <= b, x >= 0}``; ``None`` if empty."""
    n = len(c)
    # x >= 0 written as -x <= 0
    full_a = A + [[-Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    full_b = b + [Fraction(0)] * n
    best = None
    for idx in combinations(range(len(full_a)), n):
        x = _solve_square([full_a[i] for i in idx], [full_b[i] for i in idx])
        if x is None:
            continue
        if any(sum(a * xi for a, xi in zip(row, x)) > bi for row, bi in zip(full_a, full_b)):
            continue
        val = sum(ci * xi for ci, xi in zip(c, x))
        if best is None or val > best:
            best = val
    return best


def lp_oracle(rows, rels, rhs, c):
    """``("optimal", value)``, ``("infeasible", None)`` or ``("unbounded", None)``
    for ``max c·x`` subject to the rows and ``x >= 0``."""
    A, b = _as_le(rows, rels, rhs)
    c = [Fraction(x) for x in c]
    best = _best_vertex(A, b, c)
    if best is None:
        return "infeasible", None
    # recession directions: A d <= 0, d >= 0, Σd <= 1
    n = len(c)
    ray_a = [list(r) for r in A] + [[Fraction(1)] * n]
    ray_b = [Fraction(0)] * len(A) + [Fraction(1)]
    if _best_vertex(ray_a, ray_b, c) > 0:
        return "unbounded", None
    return "optimal", best


# -- path games ---------------------------------------------------------------


def path_incorporate(caps, demands, order, closest_first=True):
    """Incorporation greedy on the path ``1..n`` written from scratch.

    ``caps`` uses ``None`` for unbounded.  ``demands`` maps ``(u, v)`` with
    ``u < v`` to a demand.  Returns ``{(u, v): amount}``.
    """
    res = [None] + [None if c is None else Fraction(c) for c in caps]
    flow = {}
    inside = {order[0]}
    for v in order[1:]:
        partners = sorted((k for k in inside if (min(k, v), max(k, v)) in demands), key=lambda k: (abs(k - v), k))
        if not closest_first:
            partners = sorted(partners, key=lambda k: (-abs(k - v), k))
        inside.add(v)
        for k in partners:
            a, b = min(k, v), max(k, v)
            amt = Fraction(demands[(a, b)])
            for x in range(a, b + 1):
                if res[x] is not None:
                    amt = min(amt, res[x])
            for x in range(a, b + 1):
                if res[x] is not None:
                    res[x] -= amt
            flow[(a, b)] = amt
    return flow


def path_payoff(n, flow):
    pay = [Fraction(0)] * n
    for (u, v), amt in flow.items():
        pay[u - 1] += amt
        pay[v - 1] += amt
    return tuple(pay)


def path_orders(n):
    """All valid incorporation orders of the path ``1..n`` (intervals grown one node at a time)."""
    out = []

    def grow(lo, hi, seq):
        if lo == 1 and hi == n:
            out.append(tuple(seq))
            return
        if lo > 1:
            grow(lo - 1, hi, seq + [lo - 1])
        if hi < n:
            grow(lo, hi + 1, seq + [hi + 1])

    for s in range(1, n + 1):
        grow(s, s, [s])
    return out


def all_proper_subsets(nodes):
    nodes = list(nodes)
    for size in range(1, len(nodes)):
        yield from combinations(nodes, size)
