from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from flowcore.model import Flow, path_instance

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def line4_instance():
    """Four players; ends unbounded, middle capacity 2."""
    return path_instance(["inf", 2, 2, "inf"], {(1, 3): 2, (2, 4): 2, (1, 2): 1, (2, 3): 2, (3, 4): 1})


def line6_instance():
    """Six players where greedy routing of nested intervals is not stable."""
    return path_instance([2, 2, 4, 4, 2, 2], {(1, 2): 1, (5, 6): 1, (1, 3): 1, (4, 6): 1, (2, 4): 2, (3, 5): 2})


def nested_greedy_flow(inst):
    return Flow.from_amounts(inst, {(1, 2): 1, (5, 6): 1, (1, 3): 1, (4, 6): 1})


def p4_instance():
    return path_instance([1, 1, 1, 1], {(1, 4): 1, (2, 3): 1})


@pytest.fixture
def line4():
    return line4_instance()


@pytest.fixture
def line6():
    return line6_instance()


@pytest.fixture
def p4():
    return p4_instance()


@st.composite
def path_games(draw, max_n=6, max_cap=3, max_demand=2, unbounded=True, fractional=False):
    """Random path games; capacities may be unbounded, demands may be zero."""
    n = draw(st.integers(2, max_n))
    cap_values = st.integers(0, max_cap)
    if fractional:
        cap_values = st.builds(Fraction, st.integers(0, 2 * max_cap), st.sampled_from([1, 2]))
    caps = []
    for _ in range(n):
        if unbounded and draw(st.integers(0, 5)) == 0:
            caps.append("inf")
        else:
            caps.append(draw(cap_values))
    demands = {}
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if draw(st.booleans()):
                demands[(u, v)] = draw(st.integers(0, max_demand))
    return path_instance(caps, demands)
