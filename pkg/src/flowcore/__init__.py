"""Exact core computations for multicommodity flow coalition games."""

from .certificate import Certificate, certify_coalition, check_certificate, implied_z
from .empirical import gen_constant, gen_gaussian, gen_random_graph, run_ecore, sweep, time_matrix
from .incorporate import (
    IncorporationOrder,
    count_orders,
    enumerate_orders,
    incorporate,
    incorporate_spider,
    random_valid_order,
)
from .lp import deviation_margin, fairness_lp, solve, sw_lp
from .model import (
    UNBOUNDED,
    Flow,
    GameInstance,
    StructureError,
    is_feasible,
    path_instance,
    payoff,
)
from .singlesink import SingleSinkInstance, bicriteria, fair_core_flow
from .verify import scale_instance, verify_approx_core, verify_core

__version__ = "0.1.0"

__all__ = [
    "UNBOUNDED",
    "Certificate",
    "Flow",
    "GameInstance",
    "IncorporationOrder",
    "SingleSinkInstance",
    "StructureError",
    "bicriteria",
    "certify_coalition",
    "check_certificate",
    "count_orders",
    "deviation_margin",
    "enumerate_orders",
    "fair_core_flow",
    "fairness_lp",
    "gen_constant",
    "gen_gaussian",
    "gen_random_graph",
    "implied_z",
    "incorporate",
    "incorporate_spider",
    "is_feasible",
    "path_instance",
    "payoff",
    "random_valid_order",
    "run_ecore",
    "scale_instance",
    "solve",
    "sw_lp",
    "sweep",
    "time_matrix",
    "verify_approx_core",
    "verify_core",
]
