import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from flowcore.empirical import (
    EcoreReport,
    gen_constant,
    gen_gaussian,
    gen_random_graph,
    generate,
    parse_grid,
    round_half_away,
    run_ecore,
    sweep,
    time_matrix,
    truncated_normal,
    write_ecore_csv,
    write_timematrix_csv,
)
from flowcore.incorporate import enumerate_orders, incorporate
from flowcore.model import path_instance, payoff


def test_constant_model():
    g = gen_constant(3, 1, 1)
    assert [g.capacity[v] for v in g.nodes] == [1, 1, 1]
    assert g.demands == {(1, 2): 1, (1, 3): 1, (2, 3): 1}
    assert set(gen_constant(4, 2, 0).demands.values()) == {0}
    with pytest.raises(ValueError):
        gen_constant(1, 1, 1)


def test_rounding_goes_away_from_zero():
    assert list(round_half_away(np.array([0.5, 1.5, 2.5, -0.5, 2.49]))) == [1, 2, 3, -1, 2]


def test_truncated_normal_matches_the_reference_law():
    rng = np.random.default_rng(2024)
    n = 50
    mu, sigma = n / 2, 2 * math.sqrt(n)
    draws = truncated_normal(rng, 20_000, mu, sigma, 1, n)
    assert draws.min() >= 1 and draws.max() <= n
    law = stats.truncnorm((1 - mu) / sigma, (n - mu) / sigma, loc=mu, scale=sigma)
    assert stats.kstest(draws, law.cdf).pvalue > 0.01


def test_gaussian_model_mean_and_capacities():
    D = 10_000
    g = gen_gaussian(50, 2, D, seed=5)
    assert sum(g.demands.values()) == D
    mu, sigma = 25, 2 * math.sqrt(50)
    law = stats.truncnorm((1 - mu) / sigma, (50 - mu) / sigma, loc=mu, scale=sigma)
    mean = sum((u + v) * d for (u, v), d in g.demands.items()) / (2 * D)
    assert abs(mean - law.mean()) < 3 * law.std() / math.sqrt(2 * D)
    marginal = {v: sum(d for k, d in g.demands.items() if v in k) for v in g.nodes}
    assert all(g.capacity[v] == 2 * marginal[v] for v in g.nodes)


def test_gaussian_model_edge_cases():
    g = gen_gaussian(10, 3, 0, seed=1)
    assert g.demands == {} and set(g.capacity.values()) == {0}
    assert gen_gaussian(10, 1, 30, seed=4) == gen_gaussian(10, 1, 30, seed=4)
    with pytest.raises(ValueError):
        gen_gaussian(10, 1, Fraction(1, 2), seed=1)


def test_random_graph_density_and_ranges():
    n = 100
    pairs = n * (n - 1) // 2
    sd = math.sqrt(pairs / 4)
    for seed in range(200):
        g = gen_random_graph(n, 5, 3, seed)
        assert abs(len(g.demands) - pairs / 2) <= 4 * sd
        assert all(1 <= d <= 3 for d in g.demands.values())
        assert all(1 <= c <= 5 for c in g.capacity.values())
    assert gen_random_graph(20, 4, 4, 9) == gen_random_graph(20, 4, 4, 9)
    with pytest.raises(ValueError):
        gen_random_graph(5, 0, 1, 1)


def test_generate_dispatch():
    assert generate("constant", 4, 1, 1) == gen_constant(4, 1, 1)
    assert generate("random", 6, 3, 2, seed=1) == gen_random_graph(6, 3, 2, 1)
    with pytest.raises(ValueError):
        generate("gaussian", 6, 1, 4)
    with pytest.raises(ValueError):
        generate("lattice", 6, 1, 1, seed=1)


def test_single_sample_report():
    rep = run_ecore(gen_constant(5, 2, 1), 1, seed=3)
    assert rep.distinct == 1
    assert rep.sw.min == rep.sw.mean == rep.sw.max
    assert rep.fairness.min == rep.fairness.max


def test_line4_report_and_audit(line4):
    exhaustive = {payoff(line4, incorporate(line4, o).flow) for o in enumerate_orders(line4)}
    assert (1, 2, 2, 1) in exhaustive
    rep = run_ecore(line4, 200, seed=0, audit=True)
    assert set(rep.vectors) <= exhaustive and (1, 2, 2, 1) in rep.vectors
    assert sum(rep.vectors.values()) == 200
    assert rep.audited and rep.audit_failures == ()
    assert rep.sw.max <= rep.lp_sw and rep.fairness.max <= rep.lp_fairness
    data = rep.to_dict()
    assert data["distinct_core_vectors"] == rep.distinct
    assert data["vectors"][0]["count"] == max(rep.vectors.values())


def test_sample_weighted_mean():
    rep = run_ecore(path_instance([1, 1, 1], {(1, 2): 1, (2, 3): 1}), 300, seed=1, lp=False)
    total = sum(sum(p) * c for p, c in rep.vectors.items())
    assert rep.sw.mean == Fraction(total, 300)
    assert rep.lp_sw is None


def test_sampling_is_seeded_and_split_independent():
    g = gen_constant(12, 3, 1)
    a = run_ecore(g, 200, seed=42, lp=False, workers=1)
    b = run_ecore(g, 200, seed=42, lp=False, workers=3)
    assert a.vectors == b.vectors


def test_report_bounds_on_random_games():
    for seed in range(5):
        g = gen_random_graph(8, 3, 2, seed)
        rep = run_ecore(g, 100, seed=seed, audit=True)
        assert rep.sw.max <= rep.lp_sw
        assert rep.fairness.max <= rep.lp_fairness
        assert not rep.audit_failures


def test_two_player_time_matrix():
    tm = time_matrix(path_instance([1, 1], {(1, 2): 1}), 50, seed=0)
    assert sum(map(sum, tm.counts)) == 100
    assert tm.average(1, 1) == tm.average(2, 2) == 1
    assert tm.average(1, 2) == tm.average(2, 1) == 1
    assert tm.avg.shape == (2, 2)


def test_time_matrix_is_deterministic_and_partial():
    g = gen_constant(6, 2, 1)
    a = time_matrix(g, 40, seed=9)
    assert a == time_matrix(g, 40, seed=9)
    assert all(sum(row) == 40 for row in a.counts)
    b = time_matrix(g, 1, seed=9)
    assert np.isnan(b.avg).sum() == 30


def test_parse_grid():
    assert parse_grid("0:6:2") == [0, 2, 4, 6]
    assert parse_grid("0:5:2") == [0, 2, 4]
    assert parse_grid("1:3") == [1, 2, 3]
    assert parse_grid("1/2, 3") == [Fraction(1, 2), 3]
    with pytest.raises(ValueError):
        parse_grid("0:4:0")


def test_sweep_and_csv(tmp_path):
    rows = sweep("constant", 6, 1, [0, 1, 12], samples=30, seed=2)
    assert [C for C, _ in rows] == [0, 1, 12]
    assert rows[0][1].distinct == 1 and rows[-1][1].distinct == 1
    assert isinstance(rows[1][1], EcoreReport)
    out = tmp_path / "ecore.csv"
    write_ecore_csv(rows, out, header={"seed": 2})
    lines = out.read_text().splitlines()
    assert lines[0] == "# seed: 2"
    table = list(csv.DictReader(lines[1:]))
    assert [r["C"] for r in table] == ["0", "1", "12"]
    assert table[2]["lp_sw"] == "30.000000"


def test_random_sweep_uses_distinct_games():
    rows = sweep("random", 8, 2, [3, 3], samples=5, seed=1)
    assert rows[0][1].lp_sw != rows[1][1].lp_sw or rows[0][1].vectors != rows[1][1].vectors


def test_timematrix_csv(tmp_path):
    tm = time_matrix(gen_constant(3, 1, 1), 10, seed=0)
    out = tmp_path / "tm.csv"
    write_timematrix_csv(tm, out)
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 9 and set(rows[0]) == {"position", "time", "avg", "count"}
    assert sum(int(r["count"]) for r in rows) == 30
