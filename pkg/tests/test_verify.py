from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import nested_greedy_flow, path_games
from oracles import all_proper_subsets
from flowcore.incorporate import incorporate, random_valid_order
from flowcore.lp import deviation_margin
from flowcore.model import UNBOUNDED, Flow, GameInstance, path_instance, payoff
from flowcore.verify import (
    SubsetBudgetExceeded,
    candidate_coalitions,
    scale_instance,
    verify_approx_core,
    verify_core,
)


def test_line4_core_vectors(line4):
    for pay in ((2, 1, 2, 1), (1, 2, 1, 2)):
        assert verify_core(line4, pay).in_core


def test_line4_equal_split_breaks_at_inner_pair(line4):
    verdict = verify_core(line4, (Fraction(3, 2),) * 4)
    assert not verdict.in_core
    assert verdict.breakaway.S == (2, 3)
    assert verdict.coalitions_checked == 6
    assert payoff(line4, verdict.breakaway.flow)[1:3] == (2, 2)
    data = verdict.to_dict()
    assert data["breakaway"]["S"] == [2, 3] and data["in_core"] is False


def test_line4_equal_split_is_approximately_stable(line4):
    assert verify_approx_core(line4, (Fraction(3, 2),) * 4, Fraction(4, 3)).in_core
    assert not verify_approx_core(line4, (Fraction(3, 2),) * 4, Fraction(5, 4)).in_core
    with pytest.raises(ValueError):
        verify_approx_core(line4, (0,) * 4, Fraction(1, 2))


def test_nested_greedy_flow_is_not_in_the_core(line6):
    flow = nested_greedy_flow(line6)
    assert payoff(line6, flow) == (2, 1, 1, 1, 1, 2)
    verdict = verify_core(line6, flow)
    assert verdict.breakaway.S == (2, 3, 4, 5)
    assert payoff(line6, verdict.breakaway.flow) == (0, 2, 2, 2, 2, 0)


def test_path_candidates_are_intervals_by_size():
    inst = path_instance([1] * 4, {})
    assert list(candidate_coalitions(inst)) == [(1,), (2,), (3,), (4,), (1, 2), (2, 3), (3, 4), (1, 2, 3), (2, 3, 4)]


def test_general_candidates_are_connected_and_bounded():
    star = GameInstance((1, 2, 3, 4), ((1, 2), (1, 3), (1, 4)), {v: 1 for v in range(1, 5)}, {(2, 3): 1})
    cands = list(candidate_coalitions(star))
    assert (2, 3) not in cands and (1, 2, 3) in cands
    nodes = tuple(range(1, 15))
    big = GameInstance(nodes, tuple((1, v) for v in nodes[1:]), {v: 1 for v in nodes}, {}, topology="general")
    with pytest.raises(SubsetBudgetExceeded):
        list(candidate_coalitions(big))


def test_single_node_and_demand_free_games_are_stable():
    assert verify_core(path_instance([5], {}), Flow({})).in_core
    assert verify_core(path_instance([1, 1], {}), Flow({})).in_core


def test_scale_instance_examples(line4):
    half = scale_instance(line4, Fraction(1, 2))
    assert half.capacity[1] is UNBOUNDED and half.capacity[2] == 1
    assert half.demands[(1, 3)] == 1 and half.demands[(2, 3)] == 1
    assert scale_instance(line4, 1) == line4
    for bad in (0, Fraction(3, 2)):
        with pytest.raises(ValueError):
            scale_instance(line4, bad)


def _brute_force_core(inst, pay):
    return all(deviation_margin(inst, pay, S).margin <= 0 for S in all_proper_subsets(inst.nodes))


@given(path_games(max_n=5), st.data())
def test_interval_check_matches_all_subsets(inst, data):
    pay = tuple(data.draw(st.fractions(0, 3, max_denominator=2)) for _ in inst.nodes)
    assert verify_core(inst, pay).in_core == _brute_force_core(inst, pay)


@given(path_games(max_n=6), st.integers(0, 2**32))
def test_incorporate_outputs_pass_the_brute_force_check(inst, seed):
    flow = incorporate(inst, random_valid_order(inst, seed=seed)).flow
    assert _brute_force_core(inst, payoff(inst, flow))


@given(path_games(max_n=5), st.data())
def test_approximate_core_is_monotone_in_the_factor(inst, data):
    pay = tuple(data.draw(st.fractions(0, 2, max_denominator=2)) for _ in inst.nodes)
    lo = data.draw(st.fractions(1, 2, max_denominator=4))
    hi = lo + data.draw(st.fractions(0, 2, max_denominator=4))
    if verify_approx_core(inst, pay, lo).in_core:
        assert verify_approx_core(inst, pay, hi).in_core


@given(path_games(max_n=6, fractional=True), st.sampled_from([Fraction(1, 2), Fraction(2, 3), Fraction(4, 5)]), st.integers(0, 2**32))
def test_core_of_shrunk_game_is_approximate_core(inst, factor, seed):
    small = scale_instance(inst, factor)
    flow = incorporate(small, random_valid_order(small, seed=seed)).flow
    assert verify_approx_core(inst, flow, 1 / factor).in_core
