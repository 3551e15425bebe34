"""Unit disk graphs on a segment (1D) or a strip/rectangle (2D).

Coordinates are expressed in radio ranges: two nodes are adjacent iff their
Euclidean distance is strictly below 1.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

PLACEMENTS = ("fixed-n", "poisson")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class DeploymentSpec:
    dimension: int
    length: float
    density: float
    seed: int = 0
    placement: str = "fixed-n"
    # 2D only: the short side of the rectangle. The deployment model is a
    # 1 x length strip; widening it is only used to probe bulk degree.
    width: float = 1.0

    def validate(self) -> None:
        if self.dimension not in (1, 2):
            raise GraphError(f"dimension must be 1 or 2, got {self.dimension}")
        if not self.length > 0:
            raise GraphError(f"length must be positive, got {self.length}")
        if not self.density > 0:
            raise GraphError(f"density must be positive, got {self.density}")
        if self.dimension == 2 and not self.width > 0:
            raise GraphError(f"width must be positive, got {self.width}")
        if self.placement not in PLACEMENTS:
            raise GraphError(f"unknown placement {self.placement!r}")

    @property
    def area(self) -> float:
        return self.length if self.dimension == 1 else self.length * self.width

    @property
    def expected_n(self) -> float:
        return self.density * self.area


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: tuple[tuple[int, ...], ...]
    positions: tuple[tuple[float, ...], ...] | None = None
    dim: int = 0
    length: float = 0.0
    seed: int = 0
    edges: frozenset[tuple[int, int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.adjacency) != self.n:
            raise GraphError("adjacency length does not match n")
        edges = set()
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if v == u:
                    raise GraphError(f"self-loop at {u}")
                if u not in self.adjacency[v]:
                    raise GraphError(f"asymmetric adjacency {u}->{v}")
                edges.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(edges))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], **kw) -> Graph:
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(n, tuple(tuple(sorted(s)) for s in nbrs), **kw)

    @property
    def nodes(self) -> range:
        return range(self.n)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple[int, ...]:
        self._check(u)
        return self.adjacency[u]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def without_edges(self, removed: Iterable[tuple[int, int]]) -> Graph:
        cut = {(min(u, v), max(u, v)) for u, v in removed}
        return Graph.from_edges(
            self.n, (e for e in self.edges if e not in cut),
            positions=self.positions, dim=self.dim, length=self.length, seed=self.seed,
        )

    def _check(self, u: int) -> None:
        if not 0 <= u < self.n:
            raise GraphError(f"unknown node {u}")

    # -- serialization -------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"{self.n} {self.length!r} {self.dim} {self.seed}"]
        for u in range(self.n):
            if self.positions is None:
                lines.append(str(u))
            else:
                lines.append(" ".join([str(u), *(repr(c) for c in self.positions[u])]))
        lines.extend(f"{u} {v}" for u, v in sorted(self.edges))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> Graph:
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or len(rows[0]) != 4:
            raise GraphError("missing header 'n length dim seed'")
        n, length, dim, seed = int(rows[0][0]), float(rows[0][1]), int(rows[0][2]), int(rows[0][3])
        node_rows = rows[1:1 + n]
        if len(node_rows) != n:
            raise GraphError("truncated node section")
        positions = None
        if dim:
            positions = []
            for i, row in enumerate(node_rows):
                if int(row[0]) != i or len(row) != dim + 1:
                    raise GraphError(f"bad node line {' '.join(row)!r}")
                positions.append(tuple(float(c) for c in row[1:]))
            positions = tuple(positions)
        edges = []
        for row in rows[1 + n:]:
            if len(row) != 2:
                raise GraphError(f"bad edge line {' '.join(row)!r}")
            edges.append((int(row[0]), int(row[1])))
        return cls.from_edges(n, edges, positions=positions, dim=dim, length=length, seed=seed)


# -- construction ------------------------------------------------------------

def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed derived from a tuple of non-negative integers."""
    state = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts]).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def _fixed_n(spec: DeploymentSpec) -> int:
    return int(math.floor(spec.expected_n + 0.5))


def unit_disk_edges(points: np.ndarray) -> list[tuple[int, int]]:
    """All pairs at distance strictly below 1."""
    n = len(points)
    if n < 2:
        return []
    if points.shape[1] == 1:
        # sweep along the sorted axis
        xs = points[:, 0]
        order = np.argsort(xs, kind="stable")
        sx = xs[order]
        edges = []
        hi = 0
        for i in range(n):
            if hi < i + 1:
                hi = i + 1
            while hi < n and sx[hi] - sx[i] < 1.0:
                hi += 1
            a = int(order[i])
            for j in range(i + 1, hi):
                b = int(order[j])
                edges.append((min(a, b), max(a, b)))
        return edges
    diff = points[:, None, :] - points[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    iu, ju = np.nonzero(np.triu(d2 < 1.0, k=1))
    return list(zip(iu.tolist(), ju.tolist()))


def from_positions(points: Sequence[Sequence[float]], *, length: float = 0.0, seed: int = 0) -> Graph:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        return Graph(0, (), positions=(), dim=1, length=length, seed=seed)
    positions = tuple(tuple(float(c) for c in p) for p in pts)
    return Graph.from_edges(len(pts), unit_disk_edges(pts), positions=positions,
                            dim=pts.shape[1], length=length, seed=seed)


def generate(spec: DeploymentSpec) -> Graph:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.placement == "poisson":
        n = int(rng.poisson(spec.expected_n))
    else:
        n = _fixed_n(spec)
    if spec.dimension == 1:
        pts = rng.uniform(0.0, spec.length, size=(n, 1))
    else:
        # x across the short side, y along the long side
        pts = np.column_stack([rng.uniform(0.0, spec.width, size=n),
                               rng.uniform(0.0, spec.length, size=n)])
    return from_positions(pts, length=spec.length, seed=spec.seed)


def generate_connected(spec: DeploymentSpec, max_attempts: int = 100_000) -> tuple[Graph, int]:
    """Resample until the whole graph is connected.

    Attempt 0 uses ``spec.seed``; later attempts use seeds derived from it, so
    the result stays a pure function of the spec. Returns the graph and the
    number of rejected draws.
    """
    spec.validate()
    for attempt in range(max_attempts):
        s = spec if attempt == 0 else replace(spec, seed=derive_seed(spec.seed, attempt))
        g = generate(s)
        if g.n > 0 and is_connected(g, g.nodes):
            return g, attempt
    raise GraphError(f"no connected draw in {max_attempts} attempts (density too low?)")


# -- queries -----------------------------------------------------------------

def degree(g: Graph, u: int) -> int:
    return len(g.neighbors(u))


def set_degree(g: Graph, s: Iterable[int]) -> int:
    return sum(len(g.neighbors(u)) for u in s)


def is_connected(g: Graph, s: Iterable[int]) -> bool:
    """True iff the subgraph induced by ``s`` is connected (empty counts)."""
    members = set(s)
    if len(members) <= 1:
        return True
    start = next(iter(members))
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        for v in g.adjacency[u]:
            if v in members and v not in seen:
                seen.add(v)
                todo.append(v)
    return len(seen) == len(members)


def is_dominating(g: Graph, s: Iterable[int]) -> bool:
    members = set(s)
    return all(u in members or any(v in members for v in g.adjacency[u]) for u in range(g.n))


def components(g: Graph) -> list[list[int]]:
    seen: set[int] = set()
    out = []
    for root in range(g.n):
        if root in seen:
            continue
        comp = [root]
        seen.add(root)
        todo = deque([root])
        while todo:
            u = todo.popleft()
            for v in g.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    comp.append(v)
                    todo.append(v)
        out.append(sorted(comp))
    return out


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves: int) -> Graph:
    """Center 0 with leaves 1..leaves."""
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])
