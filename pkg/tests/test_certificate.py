import json
import random
from fractions import Fraction
from itertools import chain, combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import nested_greedy_flow, path_games
from sampling import random_binary_pair, random_coalition, random_feasible_flow, random_path_game, random_tuple
from flowcore.certificate import (
    Certificate,
    InvalidCertificate,
    anchor_conditions,
    anchors,
    cert_anchor,
    cert_globally_content,
    cert_s_content,
    certify_coalition,
    check_certificate,
    check_precertificate,
    implied_z,
    tight_nodes,
)
from flowcore.incorporate import IncorporationOrder, incorporate, random_valid_order
from flowcore.lp import deviation_margin
from flowcore.model import UNBOUNDED, Flow, StructureError, is_feasible, path_instance


def subsets(xs):
    xs = sorted(xs)
    return chain.from_iterable(combinations(xs, r) for r in range(len(xs) + 1))


def binary_candidates(inst, S):
    finite = [v for v in S if inst.capacity[v] is not UNBOUNDED]
    for Y in subsets(finite):
        for W in subsets(S):
            if W:
                yield Certificate(S, set(Y), set(W), implied_z(inst, S, Y, W))


def test_line4_equal_split_has_no_certificate_on_inner_pair(line4):
    target = (Fraction(3, 2),) * 4
    S = frozenset({2, 3})
    assert deviation_margin(line4, target, S).margin > 0
    assert not any(check_certificate(line4, target, c) for c in binary_candidates(line4, S))


def test_nested_greedy_flow_admits_no_binary_certificate(line6):
    flow = nested_greedy_flow(line6)
    S = frozenset({2, 3, 4, 5})
    assert not any(check_certificate(line6, flow, c) for c in binary_candidates(line6, S))
    res = certify_coalition(line6, flow, S)
    assert res.method == "deviation" and res.certificate is None
    assert res.witness.amounts == {(2, 4): 2, (3, 5): 2}
    assert res.margin == 1


def test_globally_content_node():
    inst = path_instance([2, 2], {(1, 2): 3})
    flow = Flow.from_amounts(inst, {(1, 2): 2})
    cert = cert_globally_content(inst, flow, {1, 2})
    assert cert.Y == cert.W == {1}
    assert check_certificate(inst, flow, cert)


def test_line4_node_three_is_content_for_every_coalition_containing_it(line4):
    flow = Flow.from_amounts(line4, {(1, 2): 1, (1, 3): 1, (3, 4): 1})
    assert is_feasible(line4, flow)
    for S in ({3}, {2, 3}, {3, 4}, {1, 2, 3}, {2, 3, 4}, {1, 3}):
        cert = cert_globally_content(line4, flow, S)
        assert cert.Y == cert.W == {3}
        assert check_certificate(line4, (2, 1, 2, 1), cert)


def test_s_content_with_empty_internal_demand():
    inst = path_instance([1, 1, 1], {(1, 3): 1})
    cert = cert_s_content(inst, Flow({}), {2})
    assert cert.Y == frozenset() and cert.W == {2} and cert.z == {}
    assert check_certificate(inst, Flow({}), cert)
    res = certify_coalition(inst, Flow({}), {2})
    assert res.method in ("globally-content", "s-content")


def test_line4_anchor_construction(line4):
    flow = incorporate(line4, IncorporationOrder(1, (2, 3, 4))).flow
    S = {1, 2, 3}
    assert tight_nodes(line4, flow) == {2, 3}
    assert anchors(line4, flow, 2).all == frozenset()
    left = anchor_conditions(line4, flow, S, "left")
    assert left["node"] == 2 and left["W"] == {2} and left["PA"] and left["PB"]
    cert = cert_anchor(line4, flow, S, "left")
    assert check_certificate(line4, flow, cert)
    assert anchor_conditions(line4, flow, S, "right")["node"] == 3


def test_anchor_sets_follow_transiting_paths():
    inst = path_instance([1, 1, 1, 1, 1], {(1, 4): 1, (3, 5): 1})
    flow = Flow.from_amounts(inst, {(1, 4): 1})
    assert anchors(inst, flow, 3) == (frozenset({1}), frozenset({4}))
    assert anchor_conditions(inst, flow, {2, 3, 4}, "left")["PA"] is False
    with pytest.raises(StructureError):
        anchor_conditions(inst, flow, {2, 4})


def test_line4_inner_pair_with_nothing_routed_needs_no_z(line4):
    flow = incorporate(line4, IncorporationOrder(1, (2, 3, 4))).flow
    assert implied_z(line4, {2, 3}, {2}, {2}) == {}
    assert check_certificate(line4, flow, Certificate({2, 3}, {2}, {2}))


def test_invalid_certificates():
    inst = path_instance(["inf", 1], {(1, 2): 1})
    with pytest.raises(InvalidCertificate):
        check_certificate(inst, (0, 0), Certificate({1, 2}, {1}, {1}))
    with pytest.raises(InvalidCertificate):
        check_certificate(inst, (0, 0), Certificate(set(), set(), {1}))
    assert "w is zero" in check_certificate(inst, (1, 1), Certificate({1, 2}, set(), set())).failure
    assert "outside S" in check_certificate(inst, (1, 1), Certificate({2}, set(), {1})).failure
    assert "outside H[S]" in check_certificate(inst, (1, 1), Certificate({2}, set(), {2}, {(1, 2): 1})).failure


def test_failure_messages_name_the_constraint(line4):
    cert = Certificate({2, 3}, set(), {2, 3})
    assert "path constraint" in check_certificate(line4, (0,) * 4, cert).failure
    cert = Certificate({2, 3}, {2}, {2})
    assert "charging" in check_certificate(line4, (0,) * 4, cert).failure


def test_precertificate_rejects_bad_structure(line4):
    flow = incorporate(line4, IncorporationOrder(1, (2, 3, 4))).flow
    with pytest.raises(StructureError):
        check_precertificate(line4, flow, {2, 3}, {2}, {3})
    with pytest.raises(StructureError):
        check_precertificate(line4, Flow({}), {2, 3}, {2}, {2})
    assert check_precertificate(line4, flow, {2, 3}, {2}, {2}) == {"P1": True, "P2": True, "P3": True, "P4": True}


def test_json_round_trip():
    binary = Certificate({1, 2, 3}, {2}, {2, 3}, {(2, 3): 1})
    text = json.dumps(binary.to_dict())
    assert set(json.loads(text)) == {"S", "Y", "W", "z"}
    assert Certificate.from_dict(json.loads(text)) == binary
    weighted = Certificate({1, 2}, {1: Fraction(1, 3)}, {1: Fraction(2, 3), 2: Fraction(1, 3)}, {(1, 2): Fraction(1, 3)})
    data = json.loads(json.dumps(weighted.to_dict()))
    assert data["w"] == {"1": "2/3", "2": "1/3"}
    assert Certificate.from_dict(data) == weighted


@pytest.mark.parametrize("seed", range(5))
def test_soundness_on_random_tuples(seed):
    rng = random.Random(seed)
    passed = 0
    for _ in range(300):
        inst, flow, S, cert = random_tuple(rng)
        if check_certificate(inst, flow, cert):
            passed += 1
            assert deviation_margin(inst, flow, S).margin <= 0
    assert passed > 50


@pytest.mark.parametrize("seed", range(3))
def test_implied_z_dominates_any_working_z(seed):
    rng = random.Random(100 + seed)
    premise = 0
    for _ in range(300):
        inst, flow, S, base = random_tuple(rng)
        hs = [k for k in inst.demands if k[0] in S and k[1] in S]
        z = {k: Fraction(rng.randint(0, 4), 2) for k in hs if rng.random() < 0.6}
        other = Certificate(S, base.y, base.w, z)
        if check_certificate(inst, flow, other):
            premise += 1
            assert check_certificate(inst, flow, base)
    assert premise > 20


@pytest.mark.parametrize("seed", range(3))
def test_passing_certificates_persist_under_more_flow(seed):
    rng = random.Random(200 + seed)
    checked = 0
    for _ in range(300):
        inst = random_path_game(rng)
        big = random_feasible_flow(inst, rng)
        small = Flow.from_amounts(inst, {k: a * Fraction(rng.randint(0, 3), 3) for k, a in big.amounts.items()})
        S = random_coalition(inst, rng)
        Y, W = random_binary_pair(inst, S, rng)
        cert = Certificate(S, Y, W, implied_z(inst, S, Y, W))
        if check_certificate(inst, small, cert):
            checked += 1
            assert check_certificate(inst, big, cert)
    assert checked > 50


@pytest.mark.parametrize("seed", range(3))
def test_precertificate_conditions_are_sufficient(seed):
    rng = random.Random(300 + seed)
    hits = 0
    for _ in range(400):
        inst = random_path_game(rng)
        flow = random_feasible_flow(inst, rng)
        S = random_coalition(inst, rng)
        Y, W = random_binary_pair(inst, S, rng, tight=tight_nodes(inst, flow))
        if all(check_precertificate(inst, flow, S, Y, W).values()):
            hits += 1
            assert check_certificate(inst, flow, Certificate(S, Y, W, implied_z(inst, S, Y, W)))
    assert hits > 20


@given(path_games(max_n=8), st.integers(0, 2**32))
def test_incorporate_outputs_are_certified_on_every_interval(inst, seed):
    flow = incorporate(inst, random_valid_order(inst, seed=seed)).flow
    for i in range(1, inst.n + 1):
        for j in range(i, inst.n + 1):
            if (i, j) == (1, inst.n):
                continue
            res = certify_coalition(inst, flow, range(i, j + 1))
            assert res.witness is None
            assert check_certificate(inst, flow, res.certificate)


@given(path_games(max_n=5), st.data())
def test_certify_agrees_with_the_margin(inst, data):
    amounts = {k: data.draw(st.fractions(0, d, max_denominator=2)) for k, d in inst.demands.items()}
    flow = Flow.from_amounts(inst, amounts)
    S = data.draw(st.sets(st.sampled_from(inst.nodes), min_size=1, max_size=inst.n - 1))
    res = certify_coalition(inst, flow, S)
    margin = deviation_margin(inst, flow, S).margin
    assert (res.witness is not None) == (margin > 0)
    if res.certificate is not None:
        assert check_certificate(inst, flow, res.certificate)
