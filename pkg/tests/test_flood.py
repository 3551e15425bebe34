from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bubbleblue.cds import MPR_CDS, OPTIMAL, WU_LI, elect
from bubbleblue.flood import (
    FloodError,
    average_flood_cost,
    check_valve_ratio,
    flooding_cost_formula,
    per_initiator_cost,
    simulate_flood,
)
from bubbleblue.udg import complete_graph, path_graph, star_graph
from conftest import random_connected


def test_formula_examples():
    assert flooding_cost_formula(path_graph(3), {1}) == Fraction(8, 3)
    assert flooding_cost_formula(star_graph(3), {0}) == Fraction(15, 4)
    tri = complete_graph(3)
    assert flooding_cost_formula(tri, tri.nodes) == 6


def test_formula_rejects_non_cds():
    with pytest.raises(FloodError):
        flooding_cost_formula(path_graph(3), {0})
    with pytest.raises(FloodError):
        flooding_cost_formula(path_graph(4), {0, 2, 3})


def test_simulate_examples():
    p = path_graph(3)
    out = simulate_flood(p, {1}, 0)
    assert (out.transmissions, out.reached) == (3, {0, 1, 2})
    assert simulate_flood(p, {1}, 0, check_valve=True).transmissions == 2
    assert simulate_flood(p, {1}, 1).transmissions == 2
    assert [simulate_flood(star_graph(3), {0}, u).transmissions for u in range(4)] == [3, 4, 4, 4]


def test_average_examples():
    p = path_graph(3)
    assert average_flood_cost(p, {1}) == Fraction(8, 3)
    tri = complete_graph(3)
    assert average_flood_cost(tri, {0}, check_valve=True) == Fraction(8, 3)
    assert average_flood_cost(tri, {0}) == Fraction(10, 3)


def test_valve_saves_one_send_on_path():
    p = path_graph(3)
    no = simulate_flood(p, {1}, 0).transmissions
    yes = simulate_flood(p, {1}, 0, check_valve=True).transmissions
    assert no - yes == 1
    assert check_valve_ratio(p, {1}) == Fraction(1 + 2 + 1, 3 * 2)


@pytest.mark.parametrize("dim,ell,lam", [(1, 8, 3), (2, 2, 4)])
def test_formula_matches_measured_flood(dim, ell, lam):
    for seed in range(100):
        g = random_connected(seed, dim, ell, lam)
        assert g.n <= 40
        for algo in (WU_LI, MPR_CDS) + ((OPTIMAL,) if g.n <= 14 else ()):
            cds = elect(g, algo).members
            assert average_flood_cost(g, cds) == flooding_cost_formula(g, cds)
            for u in g.nodes:
                out = simulate_flood(g, cds, u)
                assert out.reached == set(g.nodes)
                assert out.transmissions == per_initiator_cost(g, cds, u)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([WU_LI, MPR_CDS]))
def test_valve_dominance_and_lower_bound(seed, algo):
    g = random_connected(seed, 1, 6, 3)
    cds = elect(g, algo).members
    for u in g.nodes:
        with_valve = simulate_flood(g, cds, u, True)
        assert with_valve.reached == set(g.nodes)
        assert with_valve.transmissions <= simulate_flood(g, cds, u).transmissions
        assert with_valve.transmissions >= g.n - 1
    assert 0 < check_valve_ratio(g, cds) <= 1
