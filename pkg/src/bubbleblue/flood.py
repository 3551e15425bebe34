"""Flooding cost over a CDS backbone when every local broadcast costs one
unicast per neighbor."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .udg import Graph, is_connected, is_dominating, set_degree


class FloodError(ValueError):
    pass


@dataclass(frozen=True)
class FloodOutcome:
    initiator: int
    transmissions: int
    reached: frozenset[int]
    check_valve: bool


def _require_cds(g: Graph, cds: frozenset[int]) -> None:
    if not cds or not is_dominating(g, cds) or not is_connected(g, cds):
        raise FloodError("not a connected dominating set")


def flooding_cost_formula(g: Graph, cds: Iterable[int]) -> Fraction:
    """Closed form of the mean flooding cost: 2|E|/n + (1 - 1/n) deg(cds)."""
    cds = frozenset(cds)
    _require_cds(g, cds)
    n = g.n
    return Fraction(2 * g.num_edges, n) + (1 - Fraction(1, n)) * set_degree(g, cds)


def simulate_flood(g: Graph, cds: Iterable[int], initiator: int, check_valve: bool = False) -> FloodOutcome:
    """Replay one broadcast copy by copy.

    Deliveries are processed first-in first-out. A CDS member relays once, on
    its first copy; with the check valve it skips the neighbor that copy came
    from. Copies that hit an already-served node still count as sends.
    """
    cds = frozenset(cds)
    g.neighbors(initiator)
    adj = g.adjacency
    sent = len(adj[initiator])
    seen = {initiator}
    queue = deque((v, initiator) for v in adj[initiator])
    while queue:
        v, frm = queue.popleft()
        if v in seen:
            continue
        seen.add(v)
        if v in cds:
            for w in adj[v]:
                if check_valve and w == frm:
                    continue
                sent += 1
                queue.append((w, v))
    return FloodOutcome(initiator, sent, frozenset(seen), check_valve)


def average_flood_cost(g: Graph, cds: Iterable[int], check_valve: bool = False) -> Fraction:
    cds = frozenset(cds)
    _require_cds(g, cds)
    total = sum(simulate_flood(g, cds, u, check_valve).transmissions for u in g.nodes)
    return Fraction(total, g.n)


def per_initiator_cost(g: Graph, cds: Iterable[int], u: int) -> int:
    """deg(cds) when the initiator is a member, deg(u) + deg(cds) otherwise."""
    cds = frozenset(cds)
    return set_degree(g, cds) + (0 if u in cds else len(g.neighbors(u)))


def check_valve_ratio(g: Graph, cds: Iterable[int]) -> Fraction:
    """Share of the backbone's sends that survive the check valve.

    The initiator's own sends are removed from the valve cost when it is not
    a backbone member; the rest is divided by deg(cds).
    """
    cds = frozenset(cds)
    _require_cds(g, cds)
    backbone = 0
    for u in g.nodes:
        t = simulate_flood(g, cds, u, True).transmissions
        backbone += t - (0 if u in cds else len(g.adjacency[u]))
    return Fraction(backbone, g.n * set_degree(g, cds))
