import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from bubbleblue.cds import (
    MPR_CDS,
    OPTIMAL,
    WU_LI,
    CdsError,
    CdsResult,
    InconsistentViewError,
    TwoHopView,
    brute_force_cds,
    canonical_algorithm,
    check_views,
    elect,
    flow_feasible,
    mpr_cds,
    optimal_cds,
    select_mprs,
    validate,
    views_from_graph,
    wu_li_1999,
)
from bubbleblue.udg import DeploymentSpec, Graph, complete_graph, generate_connected, is_connected, path_graph, star_graph
from conftest import random_connected, to_nx


def nx_min_cds(g: Graph):
    """Independent exhaustive search written against networkx predicates."""
    h = to_nx(g)
    best = None
    for k in range(1, g.n + 1):
        for combo in itertools.combinations(range(g.n), k):
            if nx.is_dominating_set(h, combo) and (k == 1 or nx.is_connected(h.subgraph(combo))):
                key = (sum(h.degree(u) for u in combo), k, combo)
                best = key if best is None or key < best else best
    return best


def random_small_graph(seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 11))
    while True:
        h = nx.gnp_random_graph(n, float(rng.uniform(0.2, 0.7)), seed=int(rng.integers(2**31)))
        if nx.is_connected(h):
            return Graph.from_edges(n, h.edges)


# -- hand-evaluated examples ------------------------------------------------------------

def test_wu_li_small_cases():
    tri = complete_graph(3)
    assert wu_li_1999(views_from_graph(tri), tri).members == {0}
    p = path_graph(3)
    assert wu_li_1999(views_from_graph(p), p).members == {0, 1}
    single = Graph.from_edges(1, [])
    assert wu_li_1999(views_from_graph(single), single).members == {0}


def test_mpr_selection():
    p = path_graph(4)
    views = views_from_graph(p)
    assert select_mprs(views[1]).mprs == {2}
    assert select_mprs(views[0]).mprs == {1}
    star = star_graph(4)
    assert select_mprs(views_from_graph(star)[0]).mprs == frozenset()
    assert select_mprs(views_from_graph(Graph.from_edges(1, []))[0]).mprs == frozenset()


def test_mpr_cds_small_cases():
    tri = complete_graph(3)
    assert mpr_cds(views_from_graph(tri), None, tri).members == {0}
    p = path_graph(4)
    assert mpr_cds(views_from_graph(p), None, p).members == {0, 1, 2}
    single = Graph.from_edges(1, [])
    assert mpr_cds(views_from_graph(single), None, single).members == {0}


def test_mpr_ties_prefer_higher_degree_then_lower_id():
    # owner 0 sees neighbors 1,2,3; two-hop node 4 is reachable via 1 or 2.
    # node 2 also reaches 5, so coverage picks 2 first and 1 is never needed.
    g = Graph.from_edges(6, [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (2, 5), (3, 5)])
    assert select_mprs(views_from_graph(g)[0]).mprs == {2}
    # plain tie on coverage: 1 and 2 both cover only 4; 2 advertises more neighbors
    g = Graph.from_edges(6, [(0, 1), (0, 2), (1, 4), (2, 4), (2, 5), (0, 5)])
    assert select_mprs(views_from_graph(g)[0]).mprs == {2}
    # full tie goes to the lower id
    g = Graph.from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    assert select_mprs(views_from_graph(g)[0]).mprs == {1}


def test_optimal_small_cases():
    r = optimal_cds(path_graph(3))
    assert (r.members, r.degree_sum) == ({1}, 2)
    r = optimal_cds(complete_graph(3))
    assert (r.members, r.degree_sum) == ({0}, 2)
    r = optimal_cds(star_graph(4))
    assert (r.members, r.degree_sum) == ({0}, 4)
    assert optimal_cds(complete_graph(9)).size == 1


def test_optimal_errors():
    with pytest.raises(CdsError):
        optimal_cds(Graph.from_edges(3, [(0, 1)]))
    with pytest.raises(CdsError):
        optimal_cds(path_graph(21))
    assert optimal_cds(path_graph(21), cap=25).members == set(range(1, 20))


def test_optimal_with_root():
    r = optimal_cds(path_graph(3), root=0)
    assert r.members == {0, 1}


def test_inconsistent_views_rejected():
    views = {0: TwoHopView(0, frozenset({1}), {1: frozenset({0})}), 1: TwoHopView(1, frozenset(), {})}
    with pytest.raises(InconsistentViewError):
        check_views(views)
    with pytest.raises(InconsistentViewError):
        wu_li_1999(views)


def test_flow_examples():
    p = path_graph(3)
    assert flow_feasible(p, {0, 1, 2}, 0)
    assert not flow_feasible(p, {0, 2}, 0)
    assert flow_feasible(p, {2}, 2)
    with pytest.raises(CdsError):
        flow_feasible(p, {1}, 0)


def test_validate():
    p = path_graph(3)
    assert validate(p, optimal_cds(p))
    assert not validate(p, CdsResult(frozenset(), OPTIMAL, 0, 0))
    assert validate(p, CdsResult(frozenset(p.nodes), OPTIMAL, 4, 3))
    assert not validate(p, CdsResult(frozenset(p.nodes), OPTIMAL, 5, 3))


def test_result_line_round_trip():
    r = elect(path_graph(5), "wu-li")
    assert r.to_line() == "wu-li-1999 4 7 0,1,2,3"
    assert CdsResult.from_line(r.to_line()) == r


def test_aliases():
    assert canonical_algorithm("MPR") == MPR_CDS
    assert canonical_algorithm("wu-li") == WU_LI
    with pytest.raises(CdsError):
        canonical_algorithm("greedy")


# -- properties ---------------------------------------------------------------

@pytest.mark.parametrize("dim,ell,lam", [(1, 10, 3), (2, 2, 8), (2, 4, 5)])
def test_heuristics_are_valid_cds(dim, ell, lam):
    for seed in range(170):
        g = generate_connected(DeploymentSpec(dim, ell, lam, seed=seed))[0]
        assert 2 <= g.n <= 60
        for algo in (WU_LI, MPR_CDS):
            assert validate(g, elect(g, algo)), (seed, algo)


def test_optimal_matches_exhaustive_oracles():
    for seed in range(120):
        g = random_small_graph(seed) if seed % 2 else random_connected(seed, dim=2, ell=2, lam=4)
        if g.n > 10:
            continue
        r = optimal_cds(g)
        best = nx_min_cds(g)
        assert (r.degree_sum, r.size, tuple(sorted(r.members))) == best
        assert r.members == brute_force_cds(g)


def test_optimal_never_worse_than_heuristics():
    for seed in range(80):
        g = random_connected(seed, dim=2, ell=2, lam=7)
        opt = optimal_cds(g)
        assert validate(g, opt)
        for algo in (WU_LI, MPR_CDS):
            assert opt.degree_sum <= elect(g, algo).degree_sum


def _milp_value(g: Graph) -> float:
    """Degree-sum minimum of the single-commodity flow program, best over roots."""
    n = g.n
    arcs = [(i, j) for i in range(n) for j in g.adjacency[i]]
    deg = [len(a) for a in g.adjacency]
    best = np.inf
    for root in range(n):
        nv = n + len(arcs)
        c = np.array(deg + [0] * len(arcs), dtype=float)
        rows, lo, hi = [], [], []
        for i in range(n):  # domination
            row = np.zeros(nv)
            row[i] = 1
            row[list(g.adjacency[i])] = 1
            rows.append(row), lo.append(1), hi.append(np.inf)
        for i in range(n):  # flow balance
            row = np.zeros(nv)
            for a, (u, v) in enumerate(arcs):
                if u == i:
                    row[n + a] += 1
                if v == i:
                    row[n + a] -= 1
            if i == root:
                row[[u for u in range(n) if u != root]] -= 1
            else:
                row[i] += 1
            rows.append(row), lo.append(0), hi.append(0)
        for a, (u, v) in enumerate(arcs):  # capacity on both endpoints
            for end in (u, v):
                row = np.zeros(nv)
                row[n + a] = 1
                row[end] = -(n - 1)
                rows.append(row), lo.append(-np.inf), hi.append(0)
        lb = np.zeros(nv)
        lb[root] = 1
        integrality = np.array([1] * n + [0] * len(arcs))
        ub = np.concatenate([np.ones(n), np.full(len(arcs), np.inf)])
        res = milp(c, constraints=LinearConstraint(np.array(rows), lo, hi), integrality=integrality,
                   bounds=Bounds(lb, ub))
        if res.success:
            best = min(best, res.fun)
    return best


def test_optimal_matches_flow_program():
    for seed in range(25):
        g = random_small_graph(1000 + seed)
        if g.n < 2:
            continue
        assert optimal_cds(g).degree_sum == pytest.approx(_milp_value(g))


def test_flow_feasible_equals_connectivity_exhaustively():
    checked = 0
    for seed in range(40):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 9))
        h = nx.gnp_random_graph(n, 0.4, seed=seed)
        g = Graph.from_edges(n, h.edges)
        for k in range(1, n + 1):
            for s in itertools.combinations(range(n), k):
                for root in s:
                    assert flow_feasible(g, s, root) == is_connected(g, s)
                    checked += 1
    assert checked > 1000


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([WU_LI, MPR_CDS, OPTIMAL]))
def test_elections_are_deterministic(seed, algo):
    g = random_connected(seed, dim=2, ell=2, lam=5)
    assert elect(g, algo) == elect(g, algo)
    relabelled = Graph.loads(g.dumps())
    assert elect(relabelled, algo) == elect(g, algo)
