"""Scenario description and its line-oriented text format.

::

    # header lines
    graph path 4                 | graph edges 4 0-1 1-2 2-3 | graph file g.txt
    deploy dim=1 ell=10 lambda=3 seed=4 placement=fixed-n
    config hello_period=1s arq_timeout=500ms password=secret
    link delay=6ms jitter=2ms loss=0
    seed 7
    duration 10s
    tc off
    # timed actions
    at 3500ms chat 0 hello there
    at 4s drop-next 1 2 1 chat:
    at 5s mute 3 20s

Times are integers in microseconds, or carry a ``us``/``ms``/``s`` suffix.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..udg import DeploymentSpec, Graph, complete_graph, generate_connected, path_graph, star_graph

ACTIONS = {
    "chat": 2, "geo": 3, "media": 2, "mute": 1, "demute": 2, "repudiate": 2,
    "drop-link": 2, "restore-link": 2, "kill-node": 1, "drop-next": 2, "loss": 3,
    "partition": 2,
}

_TIME = re.compile(r"^(\d+(?:\.\d+)?)(us|ms|s)?$")
_UNIT = {None: 1, "us": 1, "ms": 1_000, "s": 1_000_000}


class ScenarioError(ValueError):
    pass


def parse_time(text: str) -> int:
    m = _TIME.match(text.strip())
    if not m:
        raise ScenarioError(f"bad time {text!r}")
    value = float(m.group(1)) * _UNIT[m.group(2)]
    if value != int(value):
        raise ScenarioError(f"time {text!r} is not a whole number of microseconds")
    return int(value)


@dataclass(frozen=True)
class Action:
    time: int
    name: str
    args: tuple[str, ...] = ()

    def line(self) -> str:
        return " ".join([str(self.time), self.name, *self.args])


@dataclass(frozen=True)
class LinkModel:
    delay: int = 6_000
    jitter: int = 2_000
    loss: float = 0.0
    # per-link overrides: ((u, v), p) with u < v
    per_link: tuple[tuple[tuple[int, int], float], ...] = ()

    def __post_init__(self):
        if self.delay - self.jitter <= 0:
            raise ScenarioError("link delays must stay positive")
        for p in (self.loss, *(p for _, p in self.per_link)):
            if not 0.0 <= p < 1.0:
                raise ScenarioError("loss probability must be in [0, 1)")

    def loss_on(self, u: int, v: int) -> float:
        key = (min(u, v), max(u, v))
        for link, p in self.per_link:
            if link == key:
                return p
        return self.loss


@dataclass(frozen=True)
class Scenario:
    graph: Graph
    actions: tuple[Action, ...] = ()
    duration: int = 10_000_000
    seed: int = 0
    link: LinkModel = LinkModel()
    config: dict = field(default_factory=dict)
    tc: bool = True

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(sorted(self.actions, key=lambda a: a.time)))
        for a in self.actions:
            _check_action(self.graph, a)

    def with_actions(self, *actions: Action) -> Scenario:
        return replace(self, actions=self.actions + tuple(actions))


def _node(graph: Graph, text: str) -> int:
    try:
        u = int(text)
    except ValueError:
        raise ScenarioError(f"bad node id {text!r}") from None
    if not 0 <= u < graph.n:
        raise ScenarioError(f"unknown node {u}")
    return u


def _edge(graph: Graph, u: str, v: str) -> tuple[int, int]:
    a, b = _node(graph, u), _node(graph, v)
    if not graph.has_edge(a, b):
        raise ScenarioError(f"unknown edge {a}-{b}")
    return a, b


def parse_cut(graph: Graph, text: str) -> list[tuple[int, int]]:
    cut = []
    for item in text.split(","):
        if "-" not in item:
            raise ScenarioError(f"bad edge {item!r}")
        cut.append(_edge(graph, *item.split("-", 1)))
    return cut


def _check_action(graph: Graph, a: Action) -> None:
    if a.name not in ACTIONS:
        raise ScenarioError(f"unknown action {a.name!r}")
    if len(a.args) < ACTIONS[a.name]:
        raise ScenarioError(f"{a.name} needs {ACTIONS[a.name]} arguments, got {len(a.args)}")
    if a.time < 0:
        raise ScenarioError("negative action time")
    if a.name in ("drop-link", "restore-link", "drop-next", "loss"):
        _edge(graph, a.args[0], a.args[1])
    elif a.name == "partition":
        parse_cut(graph, a.args[0])
        parse_time(a.args[1])
    else:
        _node(graph, a.args[0])
    if a.name == "repudiate":
        _node(graph, a.args[1])


def inject_loss(sc: Scenario, link: tuple[int, int], p: float) -> Scenario:
    """Static loss probability on one link for the whole run."""
    u, v = _edge(sc.graph, str(link[0]), str(link[1]))
    key = (min(u, v), max(u, v))
    rest = tuple(item for item in sc.link.per_link if item[0] != key)
    return replace(sc, link=replace(sc.link, per_link=rest + ((key, float(p)),)))


def partition(sc: Scenario, cut, start: int, length: int) -> Scenario:
    spec = ",".join(f"{u}-{v}" for u, v in cut)
    return sc.with_actions(Action(start, "partition", (spec, str(length))))


# -- text format -------------------------------------------------------------

def _kv(tokens) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.replace("-", "_")] = v
    return out


_INT_CONFIG = {"hold_multiplier", "tc_expiry_multiplier", "arq_max_retries", "seq_window",
               "cache_capacity", "leader", "chunk_size"}
_TIME_CONFIG = {"hello_period", "tc_period", "arq_timeout", "timestamp_tolerance", "demute_window"}
_BOOL_CONFIG = {"check_valve", "auto_repudiate_overdue"}


def _config_value(key: str, value: str):
    if key in _TIME_CONFIG:
        return parse_time(value)
    if key in _INT_CONFIG:
        return int(value)
    if key in _BOOL_CONFIG:
        return value.lower() in ("1", "true", "yes", "on")
    if key == "geo_warning_m":
        return float(value)
    if key in ("password", "cds_rule"):
        return value
    raise ScenarioError(f"unknown config key {key!r}")


def _graph_line(tokens, base: Path | None) -> Graph:
    kind = tokens[0]
    if kind == "path":
        return path_graph(int(tokens[1]))
    if kind == "complete":
        return complete_graph(int(tokens[1]))
    if kind == "star":
        return star_graph(int(tokens[1]))
    if kind == "edges":
        n = int(tokens[1])
        return Graph.from_edges(n, [tuple(int(x) for x in t.split("-")) for t in tokens[2:]])
    if kind == "file":
        path = Path(tokens[1])
        if base is not None and not path.is_absolute():
            path = base / path
        return Graph.loads(path.read_text())
    raise ScenarioError(f"unknown graph kind {kind!r}")


def parse_scenario(text: str, base: Path | None = None) -> Scenario:
    graph = None
    actions = []
    fields: dict = {}
    config: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            tokens = shlex.split(line)
            head, rest = tokens[0], tokens[1:]
            if head == "at":
                if len(rest) < 2:
                    raise ScenarioError("'at' needs a time and an action")
                name = rest[1]
                args = tuple(rest[2:])
                if name == "chat" and len(args) > 2:
                    args = (args[0], " ".join(args[1:]))
                actions.append(Action(parse_time(rest[0]), name, args))
            elif head == "graph":
                graph = _graph_line(rest, base)
            elif head == "deploy":
                kv = _kv(rest)
                spec = DeploymentSpec(int(kv.get("dim", 1)), float(kv["ell"]), float(kv["lambda"]),
                                      int(kv.get("seed", 0)), kv.get("placement", "fixed-n"))
                graph, _ = generate_connected(spec)
            elif head == "config":
                config.update({k: _config_value(k, v) for k, v in _kv(rest).items()})
            elif head == "link":
                kv = _kv(rest)
                fields["link"] = LinkModel(parse_time(kv.get("delay", "6ms")), parse_time(kv.get("jitter", "2ms")),
                                           float(kv.get("loss", 0.0)))
            elif head == "seed":
                fields["seed"] = int(rest[0])
            elif head == "duration":
                fields["duration"] = parse_time(rest[0])
            elif head == "tc":
                fields["tc"] = rest[0].lower() in ("on", "yes", "true", "1")
            else:
                raise ScenarioError(f"unknown directive {head!r}")
        except (ScenarioError, ValueError, KeyError, IndexError) as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from None
    if graph is None:
        raise ScenarioError("scenario has no graph")
    try:
        return Scenario(graph, tuple(actions), config=config, **fields)
    except ScenarioError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), base=path.parent)
