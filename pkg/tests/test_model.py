import json
import pickle
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import path_games
from flowcore.model import (
    UNBOUNDED,
    Flow,
    GameInstance,
    StructureError,
    as_fraction,
    classify_topology,
    commodity_key,
    dumps_canonical,
    flow_from_dict,
    flow_to_dict,
    induced_subgame,
    instance_from_dict,
    instance_to_dict,
    is_feasible,
    load_instance,
    node_usage,
    path_instance,
    payoff,
    residual_capacities,
    simple_paths,
    PathBudgetExceeded,
)


def test_unbounded_arithmetic():
    assert UNBOUNDED > Fraction(10**9)
    assert not UNBOUNDED < 3
    assert UNBOUNDED - 5 is UNBOUNDED
    assert UNBOUNDED + 5 is UNBOUNDED
    assert UNBOUNDED * Fraction(1, 2) is UNBOUNDED
    assert pickle.loads(pickle.dumps(UNBOUNDED)) is UNBOUNDED
    with pytest.raises(ArithmeticError):
        3 - UNBOUNDED
    with pytest.raises(ArithmeticError):
        UNBOUNDED * 0


def test_as_fraction_parses_exactly():
    assert as_fraction("3/4") == Fraction(3, 4)
    assert as_fraction("0.1") == Fraction(1, 10)
    assert as_fraction(0.1) == Fraction(1, 10)
    assert as_fraction(2) == 2
    with pytest.raises(TypeError):
        as_fraction(True)


def test_commodity_key_normalizes_and_rejects_self_demand():
    assert commodity_key(4, 2) == (2, 4)
    with pytest.raises(StructureError):
        commodity_key(3, 3)


def test_classify_topology():
    assert classify_topology((1, 2, 3), ((1, 2), (2, 3))) == ("path", None)
    assert classify_topology((1, 2, 3, 4), ((1, 2), (1, 3), (1, 4))) == ("spider", 1)
    assert classify_topology((1, 2, 3), ((1, 2), (2, 3), (1, 3)))[0] == "general"
    assert classify_topology((1, 2, 3), ((1, 2),))[0] == "general"


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(capacity={1: 1, 2: -1}, demands={}),
        dict(capacity={1: 1}, demands={}),
        dict(capacity={1: 1, 2: 1}, demands={(1, 3): 1}),
        dict(capacity={1: 1, 2: 1}, demands={(1, 2): -1}),
        dict(capacity={1: 1, 2: 1}, demands={(1, 2): 1, (2, 1): 2}),
    ],
)
def test_instance_validation_errors(kwargs):
    with pytest.raises(StructureError):
        GameInstance((1, 2), ((1, 2),), topology="path", **kwargs)


def test_disconnected_supply_graph_is_rejected_unless_allowed():
    with pytest.raises(StructureError):
        GameInstance((1, 2, 3), ((1, 2),), {1: 1, 2: 1, 3: 1}, {})
    g = GameInstance((1, 2, 3), ((1, 2),), {1: 1, 2: 1, 3: 1}, {}, check_connected=False)
    assert g.tree_path(1, 3) is None


def test_declared_topology_must_match():
    with pytest.raises(StructureError):
        GameInstance((1, 2, 3, 4), ((1, 2), (1, 3), (1, 4)), {v: 1 for v in range(1, 5)}, {}, topology="path")
    with pytest.raises(StructureError):
        GameInstance((1, 2, 3, 4), ((1, 2), (1, 3), (1, 4)), {v: 1 for v in range(1, 5)}, {}, topology="spider", root=2)


def test_line4_payoff_and_feasibility(line4):
    f = Flow.from_amounts(line4, {(1, 2): 1, (2, 3): 1, (3, 4): 1})
    assert payoff(line4, f) == (1, 2, 2, 1)
    assert is_feasible(line4, f)
    use = node_usage(line4, f)
    assert use[2] == 2 and use[3] == 2
    assert residual_capacities(line4, f)[1] is UNBOUNDED


def test_infeasible_flow_reports_capacity_before_demand(line4):
    f = Flow.from_amounts(line4, {(1, 3): 2, (2, 4): 2})
    res = is_feasible(line4, f)
    assert not res
    assert "capacity at node 2" in res.violation
    over = Flow.from_amounts(line4, {(1, 2): 2})
    assert "demand" in is_feasible(line4, over).violation


def test_flow_normalizes_paths_and_drops_zeros(line4):
    f = Flow({((3, 1), (3, 2, 1)): 1, ((2, 4), (2, 3, 4)): 0})
    assert list(f.paths) == [((1, 3), (1, 2, 3))]
    with pytest.raises(StructureError):
        Flow({((1, 3), (1, 2)): 1})
    with pytest.raises(StructureError):
        Flow({((1, 2), (1, 2)): -1})


def test_flow_arithmetic(line4):
    f = Flow.from_amounts(line4, {(1, 2): 1})
    g = Flow.from_amounts(line4, {(1, 2): Fraction(1, 2), (3, 4): 1})
    assert (f + g).amounts == {(1, 2): Fraction(3, 2), (3, 4): 1}
    assert f.scaled(Fraction(1, 2)) <= g
    assert not g <= f
    assert (f + g).total() == Fraction(5, 2)


def test_payoff_rejects_non_edges(line4):
    with pytest.raises(StructureError):
        payoff(line4, Flow({((1, 3), (1, 3)): 1}))


def test_simple_paths_budget():
    adj = {1: [2, 3], 2: [1, 3, 4], 3: [1, 2, 4], 4: [2, 3]}
    assert simple_paths(adj, 1, 4) == [(1, 2, 3, 4), (1, 2, 4), (1, 3, 2, 4), (1, 3, 4)]
    with pytest.raises(PathBudgetExceeded):
        simple_paths(adj, 1, 4, limit=2)


def test_induced_subgame_keeps_node_ids(line4):
    sub = induced_subgame(line4, {2, 3, 4})
    assert sub.nodes == (2, 3, 4)
    assert set(sub.demands) == {(2, 3), (2, 4), (3, 4)}
    gap = induced_subgame(line4, {1, 3})
    assert gap.topology == "general" and gap.tree_path(1, 3) is None


def test_serialization_round_trip(tmp_path, line4):
    data = instance_to_dict(line4)
    assert "edges" not in data and data["capacity"][0] == "inf"
    path = tmp_path / "g.json"
    path.write_text(dumps_canonical(data))
    back = load_instance(path)
    assert back == line4
    assert dumps_canonical(instance_to_dict(back)) == path.read_text()


def test_decimal_json_values_load_exactly():
    data = json.loads('{"n": 2, "topology": "path", "capacity": [0.1, "1/3"], "commodities": [{"u": 1, "v": 2, "d": 0.5}]}', parse_float=Fraction)
    g = instance_from_dict(data)
    assert g.capacity[1] == Fraction(1, 10) and g.capacity[2] == Fraction(1, 3)
    assert g.demands[(1, 2)] == Fraction(1, 2)


def test_flow_dict_round_trip(line4):
    f = Flow.from_amounts(line4, {(1, 3): Fraction(1, 2), (3, 4): 1})
    assert flow_from_dict(flow_to_dict(f), line4) == f
    assert flow_from_dict(flow_to_dict(f, with_paths=False), line4) == f


@given(path_games(fractional=True), st.data())
def test_payoff_sums_to_twice_total_flow(inst, data):
    amounts = {k: data.draw(st.fractions(0, 2, max_denominator=4)) for k in inst.demands}
    f = Flow.from_amounts(inst, amounts)
    assert sum(payoff(inst, f)) == 2 * f.total()


@given(path_games(), st.data())
def test_payoff_is_monotone_in_flow(inst, data):
    small = {k: data.draw(st.fractions(0, 1, max_denominator=3)) for k in inst.demands}
    extra = {k: data.draw(st.fractions(0, 1, max_denominator=3)) for k in inst.demands}
    f = Flow.from_amounts(inst, small)
    g = Flow.from_amounts(inst, {k: small[k] + extra[k] for k in inst.demands})
    assert f <= g
    assert all(a <= b for a, b in zip(payoff(inst, f), payoff(inst, g)))


@given(path_games())
def test_zero_flow_is_feasible(inst):
    assert is_feasible(inst, Flow({}))


@given(path_games(fractional=True))
def test_instance_json_round_trip(inst):
    text = dumps_canonical(instance_to_dict(inst))
    back = instance_from_dict(json.loads(text, parse_float=Fraction))
    assert back == inst
    assert dumps_canonical(instance_to_dict(back)) == text
