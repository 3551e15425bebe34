from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass, field

from ..cds import TwoHopView


@dataclass
class NeighborTables:
    """Symmetric / asymmetric neighbors with last-heard times, plus the
    symmetric-neighbor sets advertised by each symmetric neighbor."""

    sym: dict[int, int] = field(default_factory=dict)
    asym: dict[int, int] = field(default_factory=dict)
    two_hop: dict[int, tuple[frozenset[int], int]] = field(default_factory=dict)
    mprs: dict[int, frozenset[int]] = field(default_factory=dict)

    def heard(self, x: int, lists_us: bool, advertised_sym, advertised_mprs, now: int) -> None:
        if lists_us:
            self.asym.pop(x, None)
            self.sym[x] = now
            self.two_hop[x] = (frozenset(advertised_sym), now)
            if advertised_mprs is None:
                self.mprs.pop(x, None)
            else:
                self.mprs[x] = frozenset(advertised_mprs)
        else:
            self.forget(x)
            self.asym[x] = now

    def forget(self, x: int) -> None:
        self.sym.pop(x, None)
        self.asym.pop(x, None)
        self.two_hop.pop(x, None)
        self.mprs.pop(x, None)

    def expire(self, now: int, hold: int) -> list[int]:
        gone = [x for x, t in (*self.sym.items(), *self.asym.items()) if now - t > hold]
        for x in gone:
            self.forget(x)
        return sorted(gone)

    def view(self, owner: int) -> TwoHopView:
        sym = frozenset(self.sym)
        return TwoHopView(owner, sym, {y: self.two_hop[y][0] for y in sym if y in self.two_hop})

    def clear(self) -> None:
        self.sym.clear()
        self.asym.clear()
        self.two_hop.clear()
        self.mprs.clear()


@dataclass
class _Stream:
    highest: int = 0
    seen: set[int] = field(default_factory=set)
    gaps: dict[int, int] = field(default_factory=dict)


NEW, DUPLICATE, STALE = "new", "duplicate", "stale"


class SequenceLedger:
    """Per-originator sliding window of seen sequence numbers.

    Sequence numbers start at 1. A jump past ``highest + 1`` records every
    skipped number (inside the window) as a gap with its detection time.
    """

    def __init__(self, window: int = 64, track_gaps: bool = True):
        self.window = window
        self.track_gaps = track_gaps
        self.streams: dict[int, _Stream] = {}

    def record(self, origin: int, seq: int, now: int) -> str:
        st = self.streams.setdefault(origin, _Stream())
        floor = st.highest - self.window
        if seq <= floor:
            return STALE
        if seq in st.seen:
            return DUPLICATE
        st.seen.add(seq)
        st.gaps.pop(seq, None)
        if seq > st.highest:
            if self.track_gaps:
                for missing in range(max(st.highest + 1, seq - self.window + 1), seq):
                    if missing not in st.seen:
                        st.gaps[missing] = now
            st.highest = seq
            floor = seq - self.window
            st.seen = {s for s in st.seen if s > floor}
            st.gaps = {s: t for s, t in st.gaps.items() if s > floor}
        return NEW

    def has_seen(self, origin: int, seq: int) -> bool:
        """Seen, or too old to tell (outside the window)."""
        st = self.streams.get(origin)
        if st is None:
            return False
        return seq in st.seen or seq <= st.highest - self.window

    def gaps(self) -> dict[tuple[int, int], int]:
        return {(o, s): t for o, st in self.streams.items() for s, t in st.gaps.items()}

    def forget(self, origin: int) -> None:
        self.streams.pop(origin, None)

    def clear(self) -> None:
        self.streams.clear()


class TimestampWindow:
    """The ten most recent control timestamps per member, for replay rejection."""

    def __init__(self, size: int = 10):
        self.size = size
        self.recent: dict[int, deque[int]] = {}

    def accept(self, member: int, ts: int) -> bool:
        q = self.recent.setdefault(member, deque(maxlen=self.size))
        if ts in q:
            return False
        q.append(ts)
        return True

    def clear(self) -> None:
        self.recent.clear()


@dataclass
class DirectoryEntry:
    neighbors: dict[int, int] = field(default_factory=dict)

    @property
    def timestamp(self) -> int:
        return max(self.neighbors.values(), default=0)


class TopologyDirectory:
    def __init__(self):
        self.entries: dict[int, DirectoryEntry] = {}

    def update(self, member: int, advertised) -> bool:
        """Merge a TC; only entries with an older stored timestamp change."""
        entry = self.entries.setdefault(member, DirectoryEntry())
        changed = False
        for nbr, ts in advertised:
            if entry.neighbors.get(nbr, -1) < ts:
                entry.neighbors[nbr] = ts
                changed = True
        return changed

    def expire(self, now: int, max_age: int) -> list[int]:
        dropped = []
        for member in sorted(self.entries):
            entry = self.entries[member]
            entry.neighbors = {x: t for x, t in entry.neighbors.items() if now - t <= max_age}
            if not entry.neighbors:
                del self.entries[member]
                dropped.append(member)
        return dropped

    def snapshot(self) -> dict[int, dict[int, int]]:
        return {m: dict(e.neighbors) for m, e in sorted(self.entries.items())}

    def clear(self) -> None:
        self.entries.clear()


class PacketCache:
    """LRU of recently seen information packets, keyed by (origin, seq)."""

    def __init__(self, capacity: int = 128):
        self.capacity = capacity
        self._items: OrderedDict = OrderedDict()

    def put(self, key, value) -> None:
        self._items[key] = value
        self._items.move_to_end(key)
        while len(self._items) > self.capacity:
            self._items.popitem(last=False)

    def get(self, key):
        item = self._items.get(key)
        if item is not None:
            self._items.move_to_end(key)
        return item

    def __contains__(self, key) -> bool:
        return key in self._items

    def __len__(self) -> int:
        return len(self._items)

    def clear(self) -> None:
        self._items.clear()
