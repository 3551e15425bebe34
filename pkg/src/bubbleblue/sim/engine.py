"""Single-threaded discrete-event loop binding protocol nodes to a graph.

Every local broadcast fans out into one unicast per current neighbor, each
with its own seeded delay and loss draw. Events at the same instant run in
insertion order, so a seed fixes the whole trace.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from collections import Counter
from dataclasses import dataclass, field

from .. import crypto
from ..cds import CdsResult, canonical_algorithm, views_from_graph, wu_li_flag
from ..proto.node import Muted, Node, NodeConfig, NodeStopped, NotLeader, Transmit
from ..udg import Graph, derive_seed, set_degree
from .scenario import Action, Scenario, ScenarioError, parse_cut, parse_time

_HELLO, _TC, _TIMER, _DELIVER, _ACTION, _RESTORE = range(6)


class ConvergenceError(RuntimeError):
    pass


@dataclass
class Metrics:
    unicasts: int = 0
    deliveries: int = 0
    losses: int = 0
    app_deliveries: int = 0
    arq_sent: int = 0
    per_node_sends: Counter = field(default_factory=Counter)
    per_label: Counter = field(default_factory=Counter)
    per_link_unicasts: Counter = field(default_factory=Counter)
    per_link_losses: Counter = field(default_factory=Counter)
    flood_start: dict = field(default_factory=dict)
    flood_last_delivery: dict = field(default_factory=dict)
    cds_history: list = field(default_factory=list)

    @property
    def in_flight(self) -> int:
        return self.unicasts - self.deliveries - self.losses

    def flood_latency(self, label: str) -> int | None:
        if label not in self.flood_start or label not in self.flood_last_delivery:
            return None
        return self.flood_last_delivery[label] - self.flood_start[label]

    def summary(self) -> dict:
        return {"unicasts": self.unicasts, "deliveries": self.deliveries, "losses": self.losses,
                "in_flight": self.in_flight, "app_deliveries": self.app_deliveries,
                "arq_sent": self.arq_sent}


@dataclass
class RunResult:
    metrics: Metrics
    trace: list[str]
    nodes: list[Node]
    duplicates: int = 0

    @property
    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)

    @property
    def trace_hash(self) -> str:
        return hashlib.sha256(self.trace_text.encode()).hexdigest()


class Simulator:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        g = scenario.graph
        self.graph = g
        n = g.n
        if n < 2:
            raise ScenarioError("a bubble needs at least two members")
        matrix = crypto.generate_matrix(n, seed=derive_seed(scenario.seed, 0xB0B))
        self.nodes = [Node(NodeConfig(member=i, n=n, **scenario.config), crypto.column_for(matrix, i),
                           seed=derive_seed(scenario.seed, i)) for i in range(n)]
        self.hello_period = self.nodes[0].config.hello_period
        self.tc_period = self.nodes[0].config.tc_period
        self.links = {u: set(g.adjacency[u]) for u in range(n)}
        self.killed: set[int] = set()
        self.loss = {}
        self.drop_next: dict[tuple[int, int], list] = {}
        self.rng = random.Random(derive_seed(scenario.seed, 0x11A4))
        self.now = 0
        self._queue: list = []
        self._counter = 0
        self._wakeups: set[tuple[int, int]] = set()
        self._seen_events = [0] * n
        self._seen_deliveries = [0] * n
        self.metrics = Metrics()
        self.trace: list[str] = []
        for u in range(n):
            self._push(0, _HELLO, u)
            if scenario.tc:
                self._push(self.tc_period + self.hello_period // 2, _TC, u)
        for a in scenario.actions:
            self._push(a.time, _ACTION, a)

    # -- queue ----------------------------------------------------------------

    def _push(self, t: int, kind: int, payload) -> None:
        self._counter += 1
        heapq.heappush(self._queue, (t, self._counter, kind, payload))

    def _log(self, *parts) -> None:
        self.trace.append(" ".join(str(p) for p in (self.now, *parts)))

    def run_until(self, t_end: int) -> None:
        while self._queue and self._queue[0][0] <= t_end:
            t, _, kind, payload = heapq.heappop(self._queue)
            self.now = t
            self._dispatch(kind, payload)
        self.now = max(self.now, t_end)

    def run(self) -> RunResult:
        self.run_until(self.scenario.duration)
        return self.result()

    def result(self) -> RunResult:
        dups = sum(nd.counters["duplicate"] for nd in self.nodes)
        return RunResult(self.metrics, self.trace, self.nodes, dups)

    # -- dispatch -------------------------------------------------------------

    def _dispatch(self, kind: int, payload) -> None:
        if kind == _DELIVER:
            dst, src, data, label = payload
            if dst in self.killed:
                self.metrics.losses += 1
                self.metrics.per_link_losses[(src, dst)] += 1
                self._log("loss", f"{src}>{dst}", label, "dead")
                return
            self.metrics.deliveries += 1
            self._after(dst, self.nodes[dst].receive(src, data, self.now))
        elif kind == _HELLO:
            u = payload
            if u in self.killed:
                return
            node = self.nodes[u]
            out = node.poll(self.now) + node.tick_hello(self.now)
            self._after(u, out)
            if u == 0:
                self._sample_cds()
            self._push(self.now + self.hello_period, _HELLO, u)
        elif kind == _TC:
            u = payload
            if u in self.killed:
                return
            self._after(u, self.nodes[u].tick_tc(self.now))
            self._push(self.now + self.tc_period, _TC, u)
        elif kind == _TIMER:
            u = payload
            self._wakeups.discard((u, self.now))
            if u not in self.killed:
                self._after(u, self.nodes[u].poll(self.now))
        elif kind == _ACTION:
            self._action(payload)
        elif kind == _RESTORE:
            for u, v in payload:
                self._set_link(u, v, True)

    def _after(self, u: int, out: list[Transmit]) -> None:
        node = self.nodes[u]
        for tx in out:
            self._transmit(u, tx)
        ev = node.events
        if len(ev) < self._seen_events[u]:
            self._seen_events[u] = 0
        for _, name, detail in ev[self._seen_events[u]:]:
            self._log("event", u, name, *([detail] if detail else []))
        self._seen_events[u] = len(ev)
        dl = node.delivered
        if len(dl) < self._seen_deliveries[u]:
            self._seen_deliveries[u] = 0
        for d in dl[self._seen_deliveries[u]:]:
            label = Node.label_for(d.subtype, d.origin, d.seq)
            self.metrics.app_deliveries += 1
            self.metrics.flood_last_delivery[label] = self.now
            self._log("deliver", u, label, f"sealed-by={d.sealed_by}")
        self._seen_deliveries[u] = len(dl)
        wake = node.next_wakeup()
        if wake is not None:
            wake = max(wake, self.now + 1)
            if (u, wake) not in self._wakeups:
                self._wakeups.add((u, wake))
                self._push(wake, _TIMER, u)

    def _transmit(self, u: int, tx: Transmit) -> None:
        if u in self.killed:
            return
        if tx.label.startswith("arq:"):
            self.metrics.arq_sent += 1
        if tx.label not in self.metrics.flood_start and not tx.label.startswith("hello:"):
            self.metrics.flood_start[tx.label] = self.now
        link = self.scenario.link
        for v in sorted(self.links[u]):
            if v == tx.exclude or v in self.killed:
                continue
            self.metrics.unicasts += 1
            self.metrics.per_node_sends[u] += 1
            self.metrics.per_label[tx.label] += 1
            self.metrics.per_link_unicasts[(u, v)] += 1
            # always draw both numbers so loss settings never shift later draws
            roll = self.rng.random()
            delay = link.delay + self.rng.randint(-link.jitter, link.jitter)
            reason = None
            pending = self.drop_next.get((u, v))
            if pending and (pending[1] is None or tx.label.startswith(pending[1])):
                pending[0] -= 1
                if pending[0] <= 0:
                    del self.drop_next[(u, v)]
                reason = "scripted"
            elif roll < self.loss.get((min(u, v), max(u, v)), link.loss_on(u, v)):
                reason = "random"
            if reason:
                self.metrics.losses += 1
                self.metrics.per_link_losses[(u, v)] += 1
                self._log("loss", f"{u}>{v}", tx.label, reason)
                continue
            self._log("tx", f"{u}>{v}", tx.label)
            self._push(self.now + delay, _DELIVER, (v, u, tx.payload, tx.label))

    def _set_link(self, u: int, v: int, up: bool) -> None:
        if up:
            self.links[u].add(v)
            self.links[v].add(u)
        else:
            self.links[u].discard(v)
            self.links[v].discard(u)
        self._log("link", f"{u}-{v}", "up" if up else "down")

    def _sample_cds(self) -> None:
        members = [nd.me for nd in self.nodes if nd.cds and nd.me not in self.killed and not nd.stopped]
        self.metrics.cds_history.append((self.now, len(members), set_degree(self.graph, members)))

    # -- scripted actions -----------------------------------------------------

    def _action(self, a: Action) -> None:
        self._log("action", a.name, *a.args)
        args = a.args
        try:
            if a.name in ("drop-link", "restore-link"):
                self._set_link(int(args[0]), int(args[1]), a.name == "restore-link")
            elif a.name == "kill-node":
                u = int(args[0])
                self.killed.add(u)
            elif a.name == "drop-next":
                count = int(args[2]) if len(args) > 2 else 1
                prefix = args[3] if len(args) > 3 else None
                self.drop_next[(int(args[0]), int(args[1]))] = [count, prefix]
            elif a.name == "loss":
                u, v = int(args[0]), int(args[1])
                self.loss[(min(u, v), max(u, v))] = float(args[2])
            elif a.name == "partition":
                cut = parse_cut(self.graph, args[0])
                for u, v in cut:
                    self._set_link(u, v, False)
                self._push(self.now + parse_time(args[1]), _RESTORE, cut)
            else:
                self._node_action(a)
        except (Muted, NodeStopped, NotLeader) as exc:
            self._log("event", args[0], "action-refused", type(exc).__name__)

    def _node_action(self, a: Action) -> None:
        u = int(a.args[0])
        if u in self.killed:
            self._log("event", u, "action-refused", "killed")
            return
        node = self.nodes[u]
        now = self.now
        if a.name == "chat":
            out = node.chat(a.args[1], now)
        elif a.name == "geo":
            out = node.geo(float(a.args[1]), float(a.args[2]), now)
        elif a.name == "media":
            out = node.send_media(bytes(int(a.args[1])), now)
        elif a.name == "mute":
            offset = parse_time(a.args[1]) if len(a.args) > 1 else None
            out = node.set_mute(True, now, offset)
        elif a.name == "demute":
            result, out = node.demute(a.args[1], now)
            self._log("event", u, "demute", result.value)
        elif a.name == "repudiate":
            out = node.repudiate(int(a.args[1]), now)
        else:
            raise ScenarioError(f"unknown action {a.name}")
        self._after(u, out)

    # -- direct control used by tests and experiments --------------------------

    def originate(self, u: int, subtype: int, body: bytes) -> str:
        out = self.nodes[u].originate(subtype, body, self.now)
        self._after(u, out)
        return out[0].label

    def snapshot(self) -> tuple:
        return tuple(nd.snapshot() for nd in self.nodes)

    def live_cds(self) -> CdsResult:
        members = frozenset(nd.me for nd in self.nodes if nd.cds)
        algo = canonical_algorithm(self.nodes[0].config.cds_rule)
        return CdsResult(members, algo, set_degree(self.graph, members), len(members))


def run(scenario: Scenario) -> RunResult:
    return Simulator(scenario).run()


@dataclass
class Convergence:
    periods: int
    snapshot: tuple
    sim: Simulator


def converge(scenario: Scenario, max_periods: int = 10) -> Convergence:
    """Run hello rounds until neighbor tables and CDS flags stop changing.

    ``periods`` is the number of hello rounds sent when the final state was
    first observed.
    """
    sim = Simulator(scenario)
    T = sim.hello_period
    history = []
    for k in range(1, max_periods + 2):
        sim.run_until(k * T - 1)
        history.append(sim.snapshot())
        if len(history) >= 2 and history[-1] == history[-2]:
            first = len(history) - 1
            while first > 0 and history[first - 1] == history[-1]:
                first -= 1
            return Convergence(first + 1, history[-1], sim)
    raise ConvergenceError(f"no fixpoint within {max_periods} hello periods")


def ground_truth_snapshot(g: Graph) -> tuple:
    """What every node's tables should hold once hellos have settled (Wu-Li flags)."""
    views = views_from_graph(g)
    out = []
    for u in g.nodes:
        two_hop = tuple((y, tuple(g.adjacency[y])) for y in g.adjacency[u])
        out.append((tuple(g.adjacency[u]), (), two_hop, wu_li_flag(views[u])))
    return tuple(out)

