"""Exact rational LP solver.

Dense two-phase primal simplex with Bland's rule on a fraction-free integer
tableau: every entry is stored as an integer over one common positive
denominator, and pivots use exact integer division (Edmonds).  Infeasible
problems come back with a Farkas multiplier vector, optimal ones with a dual
solution that is checked against the primal value before returning.

Large LPs can instead be solved in ``"guided"`` mode: HiGHS proposes a primal
and dual solution in floating point, both are rationalized and the pair is
accepted only if it is exactly primal feasible, exactly dual feasible and has
equal objective values.  Otherwise the exact tableau takes over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

__all__ = [
    "LinearProgram",
    "LpOutcome",
    "LpError",
    "solve",
    "check_farkas",
    "check_dual",
    "format_lp",
]

LE, GE, EQ = "<=", ">=", "="
_RELATIONS = {LE: LE, GE: GE, EQ: EQ, "≤": LE, "≥": GE, "==": EQ}


class LpError(ValueError):
    """Malformed linear program."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass
class LinearProgram:
    """``maximize objective·x`` subject to rows and variable bounds.

    Rows are ``(coefficients, relation, rhs)`` where ``coefficients`` is either
    a dense sequence or a sparse ``{column: value}`` mapping and ``relation``
    is ``"<="``, ``">="`` or ``"="``.  ``lower[j]`` defaults to 0; ``None``
    makes the variable free.  ``upper[j]`` defaults to no bound.
    """

    objective: Sequence
    constraints: list = field(default_factory=list)
    lower: Sequence | None = None
    upper: Sequence | None = None
    names: Sequence[str] | None = None

    def __post_init__(self):
        nvar = len(self.objective)
        self.objective = [_frac(c) for c in self.objective]
        rows = []
        for entry in self.constraints:
            if len(entry) != 3:
                raise LpError("constraint must be (row, relation, rhs)")
            coef, rel, rhs = entry
            if rel not in _RELATIONS:
                raise LpError(f"unknown relation {rel!r}")
            rel = _RELATIONS[rel]
            if isinstance(coef, Mapping):
                sparse = {}
                for j, a in coef.items():
                    if not 0 <= j < nvar:
                        raise LpError(f"column {j} out of range for {nvar} variables")
                    a = _frac(a)
                    if a:
                        sparse[j] = a
            else:
                if len(coef) != nvar:
                    raise LpError(f"row has {len(coef)} coefficients, expected {nvar}")
                sparse = {j: _frac(a) for j, a in enumerate(coef) if a}
            rows.append((sparse, rel, _frac(rhs)))
        self.constraints = rows
        if self.lower is None:
            self.lower = [Fraction(0)] * nvar
        else:
            if len(self.lower) != nvar:
                raise LpError("lower bounds have the wrong length")
            self.lower = [None if b is None else _frac(b) for b in self.lower]
        if self.upper is None:
            self.upper = [None] * nvar
        else:
            if len(self.upper) != nvar:
                raise LpError("upper bounds have the wrong length")
            self.upper = [None if b is None else _frac(b) for b in self.upper]
        if self.names is not None and len(self.names) != nvar:
            raise LpError("names have the wrong length")

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def row_value(self, i: int, x: Sequence) -> Fraction:
        return sum((a * x[j] for j, a in self.constraints[i][0].items()), Fraction(0))

    def is_feasible_point(self, x: Sequence) -> bool:
        for j, v in enumerate(x):
            lo, hi = self.lower[j], self.upper[j]
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                return False
        for i, (_, rel, rhs) in enumerate(self.constraints):
            lhs = self.row_value(i, x)
            if (rel == LE and lhs > rhs) or (rel == GE and lhs < rhs) or (rel == EQ and lhs != rhs):
                return False
        return True


@dataclass(frozen=True)
class LpOutcome:
    """Result of :func:`solve`.

    ``status`` is ``"optimal"``, ``"infeasible"`` or ``"unbounded"``.

    For optimal outcomes ``dual`` holds one multiplier per constraint row and
    ``bound_dual`` one multiplier per variable upper bound (0 where absent).
    For infeasible ones ``farkas`` holds row multipliers and
    ``bound_farkas`` upper-bound multipliers such that :func:`check_farkas`
    holds.  Multiplier signs follow the row relation: ``>= 0`` for ``<=``
    rows, ``<= 0`` for ``>=`` rows, free for equalities.
    """

    status: str
    value: Fraction | None = None
    point: tuple | None = None
    dual: tuple | None = None
    bound_dual: tuple | None = None
    farkas: tuple | None = None
    bound_farkas: tuple | None = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# -- certificate checks -----------------------------------------------------


def _sign_ok(rel, y) -> bool:
    return (rel == LE and y >= 0) or (rel == GE and y <= 0) or rel == EQ


def _combination(lp: LinearProgram, y, ybound):
    g = [Fraction(0)] * lp.num_vars
    rhs = Fraction(0)
    for (row, rel, b), yi in zip(lp.constraints, y):
        if not yi:
            continue
        for j, a in row.items():
            g[j] += yi * a
        rhs += yi * b
    for j, mu in enumerate(ybound):
        if mu:
            g[j] += mu
            rhs += mu * lp.upper[j]
    return g, rhs


def check_farkas(lp: LinearProgram, y, ybound=None) -> bool:
    """True iff ``y`` proves that ``lp`` has no feasible point.

    With ``g = Σ y_i a_i + Σ μ_j e_j`` (μ for upper bounds) the requirement
    is: signs of ``y`` match the row relations, ``μ >= 0``, ``g_j >= 0`` for
    variables with a lower bound, ``g_j = 0`` for free variables, and
    ``Σ y_i b_i + Σ μ_j u_j < g·lower``.  For ``Ax <= b, x >= 0`` this is the
    textbook ``yᵀA >= 0, yᵀb < 0``.
    """
    y = [_frac(v) for v in y]
    ybound = [Fraction(0)] * lp.num_vars if ybound is None else [_frac(v) for v in ybound]
    if len(y) != len(lp.constraints) or len(ybound) != lp.num_vars:
        return False
    if any(not _sign_ok(rel, yi) for (_, rel, _), yi in zip(lp.constraints, y)):
        return False
    for j, mu in enumerate(ybound):
        if mu < 0 or (mu and lp.upper[j] is None):
            return False
    g, rhs = _combination(lp, y, ybound)
    floor = Fraction(0)
    for j, gj in enumerate(g):
        lo = lp.lower[j]
        if lo is None:
            if gj != 0:
                return False
        else:
            if gj < 0:
                return False
            floor += gj * lo
    return rhs < floor


def check_dual(lp: LinearProgram, y, ybound, value) -> bool:
    """True iff ``(y, ybound)`` is dual feasible with objective ``value``."""
    y = [_frac(v) for v in y]
    ybound = [_frac(v) for v in ybound]
    if any(not _sign_ok(rel, yi) for (_, rel, _), yi in zip(lp.constraints, y)):
        return False
    if any(mu < 0 or (mu and lp.upper[j] is None) for j, mu in enumerate(ybound)):
        return False
    g, rhs = _combination(lp, y, ybound)
    bound = rhs
    for j in range(lp.num_vars):
        slack = lp.objective[j] - g[j]  # must be <= 0, = 0 for free vars
        lo = lp.lower[j]
        if lo is None:
            if slack != 0:
                return False
        else:
            if slack > 0:
                return False
            bound += slack * lo
    return bound == value


# -- exact tableau -----------------------------------------------------------


def _lcm_denominators(values) -> int:
    out = 1
    for v in values:
        d = v.denominator
        if d != 1:
            out = out * d // math.gcd(out, d)
    return out


class _Tableau:
    """Standard form ``min c'x, A x = b >= 0, x >= 0`` in integer form."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        nvar = lp.num_vars
        # column map: per original var, list of (column, sign)
        self.var_cols = []
        ncol = 0
        for j in range(nvar):
            if lp.lower[j] is None:
                self.var_cols.append([(ncol, 1), (ncol + 1, -1)])
                ncol += 2
            else:
                self.var_cols.append([(ncol, 1)])
                ncol += 1
        self.nstruct = ncol
        lower = [Fraction(0) if b is None else b for b in lp.lower]

        # rows: (sparse over original vars, relation, rhs, origin)
        rows = []
        for i, (coef, rel, rhs) in enumerate(lp.constraints):
            shift = sum((a * lower[j] for j, a in coef.items()), Fraction(0))
            rows.append((coef, rel, rhs - shift, ("row", i)))
        for j in range(nvar):
            if lp.upper[j] is not None:
                rows.append(({j: Fraction(1)}, LE, lp.upper[j] - lower[j], ("upper", j)))
        self.origins = [r[3] for r in rows]
        m = len(rows)
        self.m = m

        # scale to integers, flip to rhs >= 0
        int_rows, rels, rhs_int = [], [], []
        self.row_factor = []  # transformed row = factor * original row
        for coef, rel, rhs, _ in rows:
            s = _lcm_denominators(list(coef.values()) + [rhs])
            flip = -1 if rhs < 0 else 1
            factor = s * flip
            self.row_factor.append(factor)
            dense = [0] * ncol
            for j, a in coef.items():
                for col, sg in self.var_cols[j]:
                    dense[col] = int(a * factor) * sg
            if flip < 0:
                rel = {LE: GE, GE: LE, EQ: EQ}[rel]
            int_rows.append(dense)
            rels.append(rel)
            rhs_int.append(int(rhs * factor))

        # slack / surplus / artificial columns
        n_slack = sum(1 for r in rels if r != EQ)
        n_art = sum(1 for r in rels if r != LE)
        self.slack_start = ncol
        self.art_start = ncol + n_slack
        total = self.art_start + n_art
        self.ncols = total
        self.ident = []  # identity column per row
        self.ident_cost1 = []  # phase-1 cost of that column
        basis = []
        s_idx, a_idx = self.slack_start, self.art_start
        T = []
        for i in range(m):
            row = int_rows[i] + [0] * (total - ncol) + [rhs_int[i]]
            rel = rels[i]
            if rel == LE:
                row[s_idx] = 1
                basis.append(s_idx)
                self.ident.append(s_idx)
                self.ident_cost1.append(0)
                s_idx += 1
            else:
                if rel == GE:
                    row[s_idx] = -1
                    s_idx += 1
                row[a_idx] = 1
                basis.append(a_idx)
                self.ident.append(a_idx)
                self.ident_cost1.append(1)
                a_idx += 1
            T.append(row)

        # phase-2 objective: min -s0 * c x'
        self.obj_scale = _lcm_denominators(lp.objective)
        cost2 = [0] * (total + 1)
        for j in range(nvar):
            cj = int(lp.objective[j] * self.obj_scale)
            for col, sg in self.var_cols[j]:
                cost2[col] = -cj * sg
        cost1 = [0] * (total + 1)
        for col in range(self.art_start, total):
            cost1[col] = 1
        for i in range(m):
            if basis[i] >= self.art_start:
                for k in range(total + 1):
                    cost1[k] -= T[i][k]
        T.append(cost2)
        T.append(cost1)
        self.T = T
        self.D = 1
        self.basis = basis
        self.pivots = 0

    def pivot(self, r: int, c: int) -> None:
        T, D = self.T, self.D
        p = T[r][c]
        prow = T[r]
        for i in range(len(T)):
            if i == r:
                continue
            row = T[i]
            f = row[c]
            if f == 0:
                if p != D:
                    T[i] = [x * p // D for x in row]
            else:
                T[i] = [(x * p - f * y) // D for x, y in zip(row, prow)]
        if p < 0:
            for i in range(len(T)):
                T[i] = [-x for x in T[i]]
            p = -p
        self.D = p
        self.basis[r] = c
        self.pivots += 1

    def run(self, obj_row: int, allowed_limit: int) -> str:
        """Bland's rule on columns ``< allowed_limit``; returns status."""
        T = self.T
        m = self.m
        while True:
            obj = T[obj_row]
            c = next((j for j in range(allowed_limit) if obj[j] < 0), None)
            if c is None:
                return "optimal"
            r = None
            for i in range(m):
                a = T[i][c]
                if a > 0:
                    if r is None:
                        r = i
                        continue
                    # compare T[i][-1]/a with T[r][-1]/T[r][c]
                    lhs = T[i][-1] * T[r][c]
                    rhs = T[r][-1] * a
                    if lhs < rhs or (lhs == rhs and self.basis[i] < self.basis[r]):
                        r = i
            if r is None:
                return "unbounded"
            self.pivot(r, c)

    def drive_out_artificials(self) -> None:
        for i in range(self.m):
            if self.basis[i] >= self.art_start:
                row = self.T[i]
                c = next((j for j in range(self.art_start) if row[j] != 0), None)
                if c is not None:
                    self.pivot(i, c)

    def row_multipliers(self, obj_row: int, phase1: bool) -> list:
        """``y = -u`` in transformed-row coordinates (times D)."""
        out = []
        obj = self.T[obj_row]
        for i in range(self.m):
            col = self.ident[i]
            cost = self.ident_cost1[i] * self.D if phase1 else 0
            out.append(Fraction(obj[col] - cost, self.D))
        return out

    def split(self, y_transformed, scale=Fraction(1)):
        """Map transformed-row multipliers onto original rows and bounds."""
        lp = self.lp
        y = [Fraction(0)] * len(lp.constraints)
        ub = [Fraction(0)] * lp.num_vars
        for i, yt in enumerate(y_transformed):
            val = yt * self.row_factor[i] / scale
            kind, idx = self.origins[i]
            if kind == "row":
                y[idx] = val
            else:
                ub[idx] = val
        return y, ub

    def primal(self) -> list:
        vals = [Fraction(0)] * self.ncols
        for i, b in enumerate(self.basis):
            vals[b] = Fraction(self.T[i][-1], self.D)
        lp = self.lp
        x = []
        for j in range(lp.num_vars):
            v = sum((vals[col] * sg for col, sg in self.var_cols[j]), Fraction(0))
            if lp.lower[j] is not None:
                v += lp.lower[j]
            x.append(v)
        return x


def _solve_exact(lp: LinearProgram) -> LpOutcome:
    tab = _Tableau(lp)
    m = tab.m
    if tab.art_start < tab.ncols:
        tab.run(m + 1, tab.ncols)
        if tab.T[m + 1][-1] != 0:
            y, ub = tab.split(tab.row_multipliers(m + 1, phase1=True))
            if not check_farkas(lp, y, ub):
                raise AssertionError("internal error: Farkas multipliers do not certify infeasibility")
            return LpOutcome("infeasible", farkas=tuple(y), bound_farkas=tuple(ub), pivots=tab.pivots)
        tab.drive_out_artificials()
    status = tab.run(m, tab.art_start)
    if status == "unbounded":
        return LpOutcome("unbounded", pivots=tab.pivots)
    x = tab.primal()
    value = sum((c * v for c, v in zip(lp.objective, x)), Fraction(0))
    y, ub = tab.split(tab.row_multipliers(m, phase1=False), scale=Fraction(tab.obj_scale))
    if not lp.is_feasible_point(x) or not check_dual(lp, y, ub, value):
        raise AssertionError("internal error: optimal basis failed exact verification")
    return LpOutcome("optimal", value, tuple(x), tuple(y), tuple(ub), pivots=tab.pivots)


# -- HiGHS-guided exact solve -------------------------------------------------

_DENOMINATOR_LIMITS = (1, 2, 4, 6, 12, 24, 60, 120, 360, 840, 2520, 5040, 10**5, 10**6)


def _solve_guided(lp: LinearProgram) -> LpOutcome | None:
    import numpy as np
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    nvar = lp.num_vars
    if nvar == 0:
        return None
    ub_r, ub_c, ub_v, b_ub, ub_rows = [], [], [], [], []
    eq_r, eq_c, eq_v, b_eq, eq_rows = [], [], [], [], []
    for i, (coef, rel, rhs) in enumerate(lp.constraints):
        if rel == EQ:
            k = len(b_eq)
            for j, a in coef.items():
                eq_r.append(k), eq_c.append(j), eq_v.append(float(a))
            b_eq.append(float(rhs))
            eq_rows.append(i)
        else:
            sg = 1 if rel == LE else -1
            k = len(b_ub)
            for j, a in coef.items():
                ub_r.append(k), ub_c.append(j), ub_v.append(sg * float(a))
            b_ub.append(sg * float(rhs))
            ub_rows.append((i, sg))
    A_ub = coo_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), nvar)).tocsr() if b_ub else None
    A_eq = coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), nvar)).tocsr() if b_eq else None
    bounds = [
        (None if lo is None else float(lo), None if hi is None else float(hi))
        for lo, hi in zip(lp.lower, lp.upper)
    ]
    c = -np.array([float(v) for v in lp.objective])
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub or None,
        A_eq=A_eq,
        b_eq=b_eq or None,
        bounds=bounds,
        method="highs-ds",
    )
    if res.status != 0:
        return None
    x_float = res.x
    y_ub = -np.asarray(res.ineqlin.marginals) if b_ub else np.zeros(0)
    y_eq = -np.asarray(res.eqlin.marginals) if b_eq else np.zeros(0)
    for limit in _DENOMINATOR_LIMITS:
        x = [Fraction(float(v)).limit_denominator(limit) for v in x_float]
        if not lp.is_feasible_point(x):
            continue
        value = sum((cj * xj for cj, xj in zip(lp.objective, x)), Fraction(0))
        y = [Fraction(0)] * len(lp.constraints)
        for (i, sg), v in zip(ub_rows, y_ub):
            yi = Fraction(float(v)).limit_denominator(limit) * sg
            y[i] = max(yi, Fraction(0)) if sg == 1 else min(yi, Fraction(0))
        for i, v in zip(eq_rows, y_eq):
            y[i] = Fraction(float(v)).limit_denominator(limit)
        g, _ = _combination(lp, y, [Fraction(0)] * nvar)
        ybound = [Fraction(0)] * nvar
        for j in range(nvar):
            slack = lp.objective[j] - g[j]
            if slack > 0 and lp.upper[j] is not None:
                ybound[j] = slack
        if check_dual(lp, y, ybound, value):
            return LpOutcome("optimal", value, tuple(x), tuple(y), tuple(ybound))
    return None


_GUIDED_THRESHOLD = 4_000


def solve(lp: LinearProgram, method: str = "auto") -> LpOutcome:
    """Solve ``lp`` exactly.

    ``method`` is ``"exact"`` (tableau simplex), ``"guided"`` (HiGHS proposal
    verified in exact arithmetic, tableau fallback) or ``"auto"``, which uses
    guided mode once rows × columns exceeds a few thousand.
    """
    if method not in ("auto", "exact", "guided"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        size = (len(lp.constraints) + sum(u is not None for u in lp.upper)) * lp.num_vars
        method = "guided" if size > _GUIDED_THRESHOLD else "exact"
    if method == "guided":
        out = _solve_guided(lp)
        if out is not None:
            return out
    return _solve_exact(lp)


def format_lp(lp: LinearProgram) -> str:
    """Plain-text dump, one constraint per line, for external cross-checks."""
    names = lp.names or [f"x{j}" for j in range(lp.num_vars)]

    def expr(coef):
        terms = [f"{a} {names[j]}" for j, a in sorted(coef.items())]
        return " + ".join(terms).replace("+ -", "- ") if terms else "0"

    lines = ["maximize: " + expr({j: c for j, c in enumerate(lp.objective) if c})]
    for i, (coef, rel, rhs) in enumerate(lp.constraints):
        lines.append(f"c{i}: {expr(coef)} {rel} {rhs}")
    for j in range(lp.num_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        lo_s = "-inf" if lo is None else str(lo)
        hi_s = "+inf" if hi is None else str(hi)
        lines.append(f"bound: {lo_s} <= {names[j]} <= {hi_s}")
    return "\n".join(lines) + "\n"
