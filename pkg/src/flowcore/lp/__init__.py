"""Exact linear programming and the game LPs built on it."""

from .simplex import LinearProgram, LpError, LpOutcome, check_dual, check_farkas, format_lp, solve

__all__ = [
    "LinearProgram",
    "LpError",
    "LpOutcome",
    "check_dual",
    "check_farkas",
    "format_lp",
    "solve",
]
from .game import (
    PATH_LIMIT,
    MarginResult,
    as_payoff,
    coalition_paths,
    demand_incident,
    deviation_lp,
    deviation_margin,
    fairness_feasible,
    fairness_lp,
    sw_lp,
)

__all__ += [
    "PATH_LIMIT",
    "MarginResult",
    "as_payoff",
    "coalition_paths",
    "demand_incident",
    "deviation_lp",
    "deviation_margin",
    "fairness_feasible",
    "fairness_lp",
    "sw_lp",
]
