"""Connected dominating set election.

Two distributed rules that only look at a node's two-hop view (the id-based
Wu-Li 1999 rule and the MPR-CDS rule) plus an exact solver for the CDS of
minimum degree sum, which is the quantity that governs Bluetooth flooding cost.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .udg import Graph, GraphError, is_connected, is_dominating, set_degree

WU_LI = "wu-li-1999"
MPR_CDS = "mpr-cds"
OPTIMAL = "optimal"
ALGORITHMS = (WU_LI, MPR_CDS, OPTIMAL)
ALIASES = {"wu-li": WU_LI, "wuli": WU_LI, WU_LI: WU_LI, "mpr": MPR_CDS, MPR_CDS: MPR_CDS,
           "opt": OPTIMAL, OPTIMAL: OPTIMAL}

DEFAULT_SOLVER_CAP = 20


class CdsError(ValueError):
    pass


class InconsistentViewError(CdsError):
    pass


def canonical_algorithm(name: str) -> str:
    try:
        return ALIASES[name.strip().lower()]
    except KeyError:
        raise CdsError(f"unknown CDS algorithm {name!r}") from None


@dataclass(frozen=True)
class TwoHopView:
    owner: int
    sym_neighbors: frozenset[int]
    neighbor_of: Mapping[int, frozenset[int]] = field(default_factory=dict)

    def advertised(self, y: int) -> frozenset[int]:
        return self.neighbor_of.get(y, frozenset())

    def two_hop(self) -> set[int]:
        """Strict two-hop neighbors: reachable through a neighbor, not adjacent, not us."""
        out: set[int] = set()
        for y in self.sym_neighbors:
            out |= self.advertised(y)
        out -= self.sym_neighbors
        out.discard(self.owner)
        return out


@dataclass(frozen=True)
class MprSelection:
    selector: int
    mprs: frozenset[int]


@dataclass(frozen=True)
class CdsResult:
    members: frozenset[int]
    algorithm: str
    degree_sum: int
    size: int

    def to_line(self) -> str:
        return f"{self.algorithm} {self.size} {self.degree_sum} {','.join(map(str, sorted(self.members)))}"

    @classmethod
    def from_line(cls, line: str) -> CdsResult:
        parts = line.split()
        if len(parts) not in (3, 4):
            raise CdsError(f"bad CDS line {line!r}")
        members = frozenset(int(x) for x in parts[3].split(",")) if len(parts) == 4 else frozenset()
        return cls(members, parts[0], int(parts[2]), int(parts[1]))


def _result(g: Graph | None, members: Iterable[int], algorithm: str,
            views: Mapping[int, TwoHopView] | None = None) -> CdsResult:
    members = frozenset(members)
    if g is not None:
        dsum = set_degree(g, members)
    else:
        dsum = sum(len(views[u].sym_neighbors) for u in members)
    return CdsResult(members, algorithm, dsum, len(members))


# -- views -------------------------------------------------------------------

def views_from_graph(g: Graph) -> dict[int, TwoHopView]:
    nbr = [frozenset(a) for a in g.adjacency]
    return {u: TwoHopView(u, nbr[u], {v: nbr[v] for v in nbr[u]}) for u in g.nodes}


def check_views(views: Mapping[int, TwoHopView]) -> None:
    for a, view in views.items():
        if view.owner != a:
            raise InconsistentViewError(f"view keyed {a} owned by {view.owner}")
        extra = set(view.neighbor_of) - view.sym_neighbors
        if extra:
            raise InconsistentViewError(f"node {a} has two-hop entries for non-neighbors {sorted(extra)}")
        for b in view.sym_neighbors:
            other = views.get(b)
            if other is not None and a not in other.sym_neighbors:
                raise InconsistentViewError(f"{a} lists {b} as symmetric but {b} omits {a}")


# -- Wu-Li 1999 (id based) --------------------------------------------------

def wu_li_flag(view: TwoHopView) -> bool:
    """Local CDS decision of the id-based Wu-Li rule."""
    x = view.owner
    nbrs = view.sym_neighbors
    if not nbrs or x < min(nbrs):
        return True
    smaller = {y for y in nbrs if y < x}
    # S must dominate N(X), using only the neighbor sets advertised by members of S
    covered = set(smaller)
    for y in smaller:
        covered |= view.advertised(y)
    if not nbrs <= covered:
        return True
    # ... and S must be connected through edges between its own members
    start = next(iter(smaller))
    seen = {start}
    todo = deque([start])
    while todo:
        y = todo.popleft()
        for z in view.advertised(y) & smaller:
            if z not in seen:
                seen.add(z)
                todo.append(z)
    return len(seen) != len(smaller)


def wu_li_1999(views: Mapping[int, TwoHopView], g: Graph | None = None) -> CdsResult:
    check_views(views)
    members = [x for x, v in views.items() if wu_li_flag(v)]
    return _result(g, members, WU_LI, views)


# -- MPR CDS ----------------------------------------------------------------

def select_mprs(view: TwoHopView) -> MprSelection:
    """Greedy MPR selection.

    Neighbors that are the only route to some two-hop node go in first; then
    the neighbor covering the most still-uncovered two-hop nodes, ties broken
    by larger advertised degree and then smaller id.
    """
    two_hop = view.two_hop()
    cover = {y: view.advertised(y) & two_hop for y in view.sym_neighbors}
    mprs: set[int] = set()
    for z in two_hop:
        coverers = [y for y, c in cover.items() if z in c]
        if len(coverers) == 1:
            mprs.add(coverers[0])
    uncovered = set(two_hop)
    for y in mprs:
        uncovered -= cover[y]
    while uncovered:
        best = max((y for y in cover if y not in mprs),
                   key=lambda y: (len(cover[y] & uncovered), len(view.advertised(y)), -y))
        if not cover[best] & uncovered:
            # advertised sets and two-hop set disagree; cannot happen on a consistent view
            raise CdsError(f"two-hop nodes {sorted(uncovered)} of {view.owner} are uncoverable")
        mprs.add(best)
        uncovered -= cover[best]
    return MprSelection(view.owner, frozenset(mprs))


def mpr_flag(view: TwoHopView, mprs_of_smallest: frozenset[int] | None) -> bool:
    """MPR-CDS rule: local minimum, or MPR of the smallest-id neighbor.

    ``mprs_of_smallest`` is the MPR set advertised by the smallest-id
    symmetric neighbor (None when it has not been heard yet).
    """
    nbrs = view.sym_neighbors
    if not nbrs:
        return True
    m = min(nbrs)
    if view.owner < m:
        return True
    return mprs_of_smallest is not None and view.owner in mprs_of_smallest


def mpr_cds(views: Mapping[int, TwoHopView], selections: Mapping[int, MprSelection] | None = None,
            g: Graph | None = None) -> CdsResult:
    check_views(views)
    if selections is None:
        selections = {u: select_mprs(v) for u, v in views.items()}
    members = []
    for x, view in views.items():
        sel = selections.get(min(view.sym_neighbors)) if view.sym_neighbors else None
        if mpr_flag(view, sel.mprs if sel is not None else None):
            members.append(x)
    return _result(g, members, MPR_CDS, views)


# -- exact minimum degree-sum CDS --------------------------------------------

def _key(dsum: int, members: Iterable[int]) -> tuple:
    ms = tuple(sorted(members))
    return (dsum, len(ms), ms)


def optimal_cds(g: Graph, root: int | None = None, cap: int = DEFAULT_SOLVER_CAP) -> CdsResult:
    """Minimum degree-sum connected dominating set by branch and bound.

    Ties are broken by cardinality, then by the lexicographically smallest
    sorted member tuple. When ``root`` is given the set is forced to contain it.
    """
    n = g.n
    if n == 0:
        raise CdsError("empty graph")
    if n > cap:
        raise CdsError(f"graph has {n} nodes, solver cap is {cap}")
    if not is_connected(g, g.nodes):
        raise CdsError("graph is disconnected")
    if root is not None and not 0 <= root < n:
        raise GraphError(f"unknown node {root}")
    if n == 1:
        return _result(g, [0], OPTIMAL)

    deg = [len(a) for a in g.adjacency]
    closed = [frozenset((u, *g.adjacency[u])) for u in range(n)]
    order = sorted(range(n), key=lambda u: (deg[u], u))
    if root is not None:
        order.remove(root)
        order.insert(0, root)
    pos = {u: i for i, u in enumerate(order)}

    best_key: tuple = _key(sum(deg), range(n))
    best: list[int] = list(range(n))
    if root is None:
        seed_set = wu_li_1999(views_from_graph(g)).members
        k = _key(set_degree(g, seed_set), seed_set)
        if k < best_key:
            best_key, best = k, sorted(seed_set)

    chosen: list[int] = []
    # cover[u] = number of chosen nodes in N[u]
    cover = [0] * n

    def feasible_connectivity(idx: int) -> bool:
        if len(chosen) <= 1:
            return True
        allowed = set(chosen)
        allowed.update(order[idx:])
        start = chosen[0]
        seen = {start}
        todo = [start]
        while todo:
            u = todo.pop()
            for v in g.adjacency[u]:
                if v in allowed and v not in seen:
                    seen.add(v)
                    todo.append(v)
        return all(c in seen for c in chosen)

    def search(idx: int, dsum: int) -> None:
        nonlocal best_key, best
        if dsum > best_key[0]:
            return
        undominated = [u for u in range(n) if cover[u] == 0]
        if not undominated and chosen and is_connected(g, chosen):
            # every extension adds positive degree, so stop here
            k = _key(dsum, chosen)
            if k < best_key:
                best_key, best = k, sorted(chosen)
            return
        if idx == n:
            return
        lb = 0
        for u in undominated:
            cand = [deg[v] for v in closed[u] if pos[v] >= idx]
            if not cand:
                return
            lb = max(lb, min(cand))
        if dsum + lb > best_key[0]:
            return
        if not feasible_connectivity(idx):
            return
        u = order[idx]
        chosen.append(u)
        for v in closed[u]:
            cover[v] += 1
        search(idx + 1, dsum + deg[u])
        for v in closed[u]:
            cover[v] -= 1
        chosen.pop()
        if root is not None and u == root:
            return
        search(idx + 1, dsum)

    search(0, 0)
    return _result(g, best, OPTIMAL)


def brute_force_cds(g: Graph) -> frozenset[int]:
    """Enumerate every subset; reference for the solver on tiny graphs."""
    from itertools import combinations
    best = None
    for k in range(1, g.n + 1):
        for combo in combinations(range(g.n), k):
            if is_dominating(g, combo) and is_connected(g, combo):
                key = _key(set_degree(g, combo), combo)
                if best is None or key < best:
                    best = key
    if best is None:
        raise CdsError("no CDS (graph disconnected or empty)")
    return frozenset(best[2])


# -- single-commodity flow connectivity check --------------------------------

def flow_feasible(g: Graph, s: Iterable[int], root: int) -> bool:
    """Feasibility of the single-commodity flow constraints for a fixed selection.

    The root must emit k-1 units, every other selected node absorbs exactly
    one, and arcs touching unselected nodes carry nothing (capacity
    (|V|-1)*x on both endpoints). With integral capacities this is feasible
    iff a max flow from a super source feeding the root (k-1) to a super sink
    draining each selected non-root node (1) saturates the source.
    """
    sel = set(s)
    if root not in sel:
        raise CdsError(f"root {root} not in the selected set")
    k = len(sel)
    if k == 1:
        return True
    src, sink = g.n, g.n + 1
    cap: dict[int, dict[int, int]] = {u: {} for u in range(g.n + 2)}

    def arc(a: int, b: int, c: int) -> None:
        cap[a][b] = cap[a].get(b, 0) + c
        cap[b].setdefault(a, 0)

    arc(src, root, k - 1)
    big = g.n - 1
    for i in sel:
        if i != root:
            arc(i, sink, 1)
        for j in g.adjacency[i]:
            if j in sel:
                arc(i, j, big)

    flow = 0
    while True:
        parent = {src: src}
        todo = deque([src])
        while todo and sink not in parent:
            a = todo.popleft()
            for b, c in cap[a].items():
                if c > 0 and b not in parent:
                    parent[b] = a
                    todo.append(b)
        if sink not in parent:
            break
        push = None
        b = sink
        while b != src:
            a = parent[b]
            push = cap[a][b] if push is None else min(push, cap[a][b])
            b = a
        b = sink
        while b != src:
            a = parent[b]
            cap[a][b] -= push
            cap[b][a] += push
            b = a
        flow += push
    return flow == k - 1


# -- helpers -----------------------------------------------------------------

def validate(g: Graph, r: CdsResult) -> bool:
    return (is_dominating(g, r.members) and is_connected(g, r.members)
            and r.size == len(r.members) and r.degree_sum == set_degree(g, r.members))


def elect(g: Graph, algorithm: str, cap: int = DEFAULT_SOLVER_CAP) -> CdsResult:
    """Run one algorithm on a ground-truth graph (views derived from it)."""
    algorithm = canonical_algorithm(algorithm)
    if algorithm == OPTIMAL:
        return optimal_cds(g, cap=cap)
    views = views_from_graph(g)
    if algorithm == WU_LI:
        return wu_li_1999(views, g)
    return mpr_cds(views, None, g)
