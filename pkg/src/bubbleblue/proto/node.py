"""Per-member protocol state machine.

A :class:`Node` never reads a clock and never touches the network. Every
entry point takes the current time in microseconds and returns the list of
:class:`Transmit` actions the radio layer must carry out; one Transmit is a
local broadcast, i.e. one unicast per Bluetooth neighbor.
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .. import crypto
from ..cds import MPR_CDS, WU_LI, canonical_algorithm, mpr_flag, select_mprs, wu_li_flag
from .tables import NEW, NeighborTables, PacketCache, SequenceLedger, TimestampWindow, TopologyDirectory
from .wire import (
    INDEFINITE,
    DataField,
    Hello,
    Kind,
    Subtype,
    WireError,
    decode_arq,
    decode_chunk,
    decode_data,
    decode_geo,
    decode_hello,
    decode_member,
    decode_merge,
    decode_mute,
    decode_tc,
    encode_arq,
    encode_chunk,
    encode_data,
    encode_geo,
    encode_hello,
    encode_member,
    encode_mute,
    encode_tc,
    split_media,
    subtype_name,
)

log = logging.getLogger(__name__)

SECOND = 1_000_000


class Muted(RuntimeError):
    pass


class NodeStopped(RuntimeError):
    pass


class NotLeader(PermissionError):
    pass


@dataclass
class NodeConfig:
    member: int
    n: int
    hello_period: int = SECOND
    tc_period: int = 5 * SECOND
    hold_multiplier: int = 3
    tc_expiry_multiplier: int = 3
    arq_timeout: int = SECOND // 2
    arq_max_retries: int = 3
    timestamp_tolerance: int | None = None
    seq_window: int = 64
    cache_capacity: int = 128
    cds_rule: str = WU_LI
    leader: int = 0
    check_valve: bool = False
    chunk_size: int = 8192
    geo_warning_m: float = 200.0
    password: str | None = None
    demute_window: int = 30 * SECOND
    auto_repudiate_overdue: bool = False

    def __post_init__(self):
        for name in ("hello_period", "tc_period", "arq_timeout", "demute_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.hold_multiplier < 1 or self.tc_expiry_multiplier < 1:
            raise ValueError("multipliers must be >= 1")
        if self.timestamp_tolerance is None:
            self.timestamp_tolerance = 2 * self.hello_period
        self.cds_rule = canonical_algorithm(self.cds_rule)
        if self.cds_rule not in (WU_LI, MPR_CDS):
            raise ValueError("live election supports wu-li-1999 or mpr-cds")

    @property
    def hold_time(self) -> int:
        return self.hold_multiplier * self.hello_period


@dataclass(frozen=True)
class Transmit:
    payload: bytes
    label: str
    # check valve: neighbor to skip
    exclude: int | None = None


@dataclass(frozen=True)
class Delivery:
    time: int
    origin: int
    seq: int
    subtype: int
    body: bytes
    sealed_by: int


@dataclass
class PeerMute:
    since: int
    until: int | None
    flagged: bool = False


class DemuteResult(Enum):
    OK = "ok"
    RETRY = "retry"
    FAILED = "failed"


def _hash_password(pw: str) -> bytes:
    return hashlib.sha256(pw.encode()).digest()


def haversine_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * 6_371_000.0 * math.asin(min(1.0, math.sqrt(h)))


class Node:
    def __init__(self, config: NodeConfig, column: crypto.KeyColumn, seed: int = 0):
        if column.owner != config.member or column.n != config.n:
            raise ValueError("key column does not belong to this member")
        self.config = config
        self.me = config.member
        self.column: crypto.KeyColumn | None = column
        self._rng = random.Random(seed)
        self._pw = _hash_password(config.password) if config.password is not None else None

        self.tables = NeighborTables()
        self.ledger = SequenceLedger(config.seq_window)
        # ARQ packets run on their own sequence space with no gap recovery
        self.arq_ledger = SequenceLedger(config.seq_window, track_gaps=False)
        self.timestamps = TimestampWindow()
        self.directory = TopologyDirectory()
        self.cache = PacketCache(config.cache_capacity)

        self.own_seq = 0
        self.own_arq_seq = 0
        self.cds = True
        self.mprs: frozenset[int] = frozenset()
        self.muted = False
        self.demute_deadline: int | None = None
        self.stopped = False
        self.last_tc: int | None = None
        self._file_ids = 0

        self.pending_arq: dict[tuple[int, int], list[int]] = {}
        self.answered: dict[tuple[int, int], int] = {}
        self.arq_log: list[tuple[int, int, int]] = []
        self.peer_mutes: dict[int, PeerMute] = {}
        self.positions: dict[int, tuple[float, float]] = {}
        self.media: dict[tuple[int, int], dict[int, bytes]] = {}
        self.media_complete: list[tuple[int, int, int, bytes]] = []
        self.delivered: list[Delivery] = []
        self.events: list[tuple[int, str, str]] = []
        self.counters: Counter = Counter()

    # -- helpers -------------------------------------------------------------

    @property
    def can_transmit(self) -> bool:
        return not (self.stopped or self.muted)

    def _event(self, now: int, name: str, detail: str = "") -> None:
        self.events.append((now, name, detail))
        log.debug("node %d t=%d %s %s", self.me, now, name, detail)

    def _seal(self, df: DataField) -> bytes:
        return crypto.seal(self.column, encode_data(df), self._rng.randbytes).to_bytes()

    @staticmethod
    def label_for(subtype: int, origin: int, seq: int) -> str:
        return f"{subtype_name(subtype)}:{origin}:{seq}"

    @staticmethod
    def label(df: DataField) -> str:
        if df.kind == Kind.CONTROL:
            return f"{subtype_name(df.subtype)}:{df.originator}"
        return Node.label_for(df.subtype, df.originator, df.seq)

    def snapshot(self) -> tuple:
        two_hop = tuple(sorted((y, tuple(sorted(s))) for y, (s, _) in self.tables.two_hop.items()))
        return (tuple(sorted(self.tables.sym)), tuple(sorted(self.tables.asym)), two_hop, self.cds)

    # -- neighbor discovery --------------------------------------------------

    def tick_hello(self, now: int) -> list[Transmit]:
        if not self.can_transmit:
            return []
        mprs = tuple(sorted(self.mprs)) if self.config.cds_rule == MPR_CDS else None
        hello = Hello(tuple(sorted(self.tables.sym)), tuple(sorted(self.tables.asym)), mprs)
        df = DataField(self.me, Kind.CONTROL, Subtype.HELLO, now, encode_hello(hello))
        self.counters["hello-tx"] += 1
        return [Transmit(self._seal(df), self.label(df))]

    def on_hello(self, df: DataField, now: int) -> None:
        if abs(now - df.stamp) > self.config.timestamp_tolerance:
            self.counters["stale"] += 1
            return
        if not self.timestamps.accept(df.originator, df.stamp):
            self.counters["replay"] += 1
            return
        try:
            hello = decode_hello(df.body)
        except WireError:
            self.counters["bad-body"] += 1
            return
        lists_us = self.me in hello.sym or self.me in hello.asym
        self.tables.heard(df.originator, lists_us, hello.sym, hello.mprs, now)
        self.recompute_cds(now)

    def recompute_cds(self, now: int = 0) -> bool:
        view = self.tables.view(self.me)
        if self.config.cds_rule == WU_LI:
            flag = wu_li_flag(view)
        else:
            self.mprs = select_mprs(view).mprs
            smallest = min(view.sym_neighbors) if view.sym_neighbors else None
            flag = mpr_flag(view, self.tables.mprs.get(smallest) if smallest is not None else None)
        if flag != self.cds:
            self._event(now, "cds", "on" if flag else "off")
        self.cds = flag
        return flag

    def expire(self, now: int) -> None:
        gone = self.tables.expire(now, self.config.hold_time)
        for x in gone:
            self._event(now, "neighbor-lost", str(x))
        for m in self.directory.expire(now, self.config.tc_expiry_multiplier * self.config.tc_period):
            self._event(now, "directory-expired", str(m))
        self.answered = {k: t for k, t in self.answered.items() if now - t < self.config.arq_timeout}
        self.recompute_cds(now)

    # -- sending -------------------------------------------------------------

    def originate(self, subtype: int, body: bytes, now: int) -> list[Transmit]:
        if self.stopped:
            raise NodeStopped(f"node {self.me} is stopped")
        if self.muted:
            raise Muted(f"node {self.me} is muted")
        if subtype == Subtype.ARQ:
            self.own_arq_seq += 1
            seq = self.own_arq_seq
        else:
            self.own_seq += 1
            seq = self.own_seq
        df = DataField(self.me, Kind.INFORMATION, subtype, seq, body)
        raw = self._seal(df)
        if subtype != Subtype.ARQ:
            self.cache.put((self.me, seq), (df, raw))
        self.counters["originated"] += 1
        return [Transmit(raw, self.label(df))]

    def chat(self, text: str, now: int) -> list[Transmit]:
        return self.originate(Subtype.CHAT, text.encode("utf-8"), now)

    def geo(self, lat: float, lon: float, now: int) -> list[Transmit]:
        out = self.originate(Subtype.GEO, encode_geo(lat, lon), now)
        self._check_geo(self.me, (lat, lon), now)
        return out

    def send_media(self, data: bytes, now: int) -> list[Transmit]:
        self._file_ids += 1
        out = []
        for chunk in split_media(self._file_ids, data, self.config.chunk_size):
            out += self.originate(Subtype.MULTIMEDIA, encode_chunk(chunk), now)
        return out

    def tick_tc(self, now: int) -> list[Transmit]:
        if not self.can_transmit or not self.cds:
            return []
        if self.last_tc is not None and now - self.last_tc < self.config.tc_period:
            return []
        self.last_tc = now
        entries = sorted(self.tables.sym.items())
        self.directory.update(self.me, entries)
        return self.originate(Subtype.TC, encode_tc(entries), now)

    # -- receiving -----------------------------------------------------------

    def receive(self, frm: int, payload: bytes, now: int) -> list[Transmit]:
        """Handle one unicast copy heard from link neighbor ``frm``."""
        if self.stopped:
            return []
        try:
            pkt = crypto.SealedPacket.from_bytes(payload, self.config.n)
            sealer = crypto.originator_of(pkt)
        except crypto.CryptoError:
            self.counters["malformed"] += 1
            return []
        if sealer == self.me:
            self.counters["duplicate"] += 1
            return []
        try:
            sealer, plain = crypto.open_packet(self.column, pkt)
            df = decode_data(plain)
        except crypto.RevokedOriginator:
            self.counters["revoked-drop"] += 1
            return []
        except crypto.SelfFieldZero:
            self.counters["excluded"] += 1
            return []
        except (crypto.CryptoError, WireError):
            self.counters["undecodable"] += 1
            return []
        if sealer in self.peer_mutes and df.subtype != Subtype.MUTE:
            del self.peer_mutes[sealer]
            self._event(now, "peer-demuted", str(sealer))
        if df.kind == Kind.CONTROL:
            if df.subtype == Subtype.HELLO:
                self.on_hello(df, now)
            else:
                self.counters["unknown-control"] += 1
            return []
        return self.on_information(df, sealer, payload, frm, now)

    def on_information(self, df: DataField, sealer: int, raw: bytes, frm: int | None, now: int) -> list[Transmit]:
        if df.originator in self.column.revoked:
            self.counters["revoked-drop"] += 1
            return []
        if df.originator == self.me:
            self.counters["duplicate"] += 1
            return []
        is_arq = df.subtype == Subtype.ARQ
        ledger = self.arq_ledger if is_arq else self.ledger
        if ledger.record(df.originator, df.seq, now) != NEW:
            self.counters["duplicate"] += 1
            return []

        out: list[Transmit] = []
        forward = self.cds and self.can_transmit
        if is_arq:
            out, forward = self.on_arq(df, now)
        else:
            key = (df.originator, df.seq)
            self.cache.put(key, (df, raw))
            self.pending_arq.pop(key, None)
            self.delivered.append(Delivery(now, df.originator, df.seq, df.subtype, df.body, sealer))
            self.counters["delivered"] += 1
            self._schedule_gaps(df.originator, now)
            out += self._apply(df, now)
        if forward:
            exclude = frm if self.config.check_valve else None
            out.insert(0, Transmit(raw, self.label(df), exclude))
        return out

    def _schedule_gaps(self, origin: int, now: int) -> None:
        st = self.ledger.streams.get(origin)
        if st is None:
            return
        for s, detected in st.gaps.items():
            if (origin, s) not in self.pending_arq:
                self.pending_arq[(origin, s)] = [detected + self.config.arq_timeout, 0]
                self._event(now, "gap", f"{origin}:{s}")

    def _apply(self, df: DataField, now: int) -> list[Transmit]:
        x = df.originator
        try:
            if df.subtype == Subtype.TC:
                self.on_tc(x, decode_tc(df.body), now)
            elif df.subtype == Subtype.MUTE:
                offset = decode_mute(df.body)
                until = None if offset is None or offset == INDEFINITE else now + offset
                self.peer_mutes[x] = PeerMute(now, until)
                self._event(now, "peer-muted", str(x))
            elif df.subtype == Subtype.FAIL:
                self._event(now, "peer-failed", str(x))
            elif df.subtype == Subtype.REPUDIATION:
                self.on_repudiation(x, decode_member(df.body), now)
            elif df.subtype == Subtype.GEO:
                self._check_geo(x, decode_geo(df.body), now)
            elif df.subtype == Subtype.MULTIMEDIA:
                self._reassemble(x, decode_chunk(df.body), now)
            elif df.subtype == Subtype.ADDITION:
                self._event(now, "addition", str(decode_member(df.body)))
            elif df.subtype == Subtype.MERGE:
                bridge, members = decode_merge(df.body)
                self._event(now, "merge", f"{bridge}:{','.join(map(str, members))}")
        except WireError as exc:
            self.counters["bad-body"] += 1
            self._event(now, "bad-body", f"{self.label(df)} {exc}")
        return []

    def on_tc(self, member: int, entries, now: int) -> None:
        if self.directory.update(member, entries):
            self.counters["tc-update"] += 1

    def _check_geo(self, x: int, pos: tuple[float, float], now: int) -> None:
        for other, p in sorted(self.positions.items()):
            if other != x and haversine_m(p, pos) > self.config.geo_warning_m:
                self._event(now, "geo-warning", f"{x}~{other}")
        self.positions[x] = pos

    def _reassemble(self, x: int, chunk, now: int) -> None:
        parts = self.media.setdefault((x, chunk.file_id), {})
        parts[chunk.index] = chunk.data
        if len(parts) == chunk.total:
            data = b"".join(parts[i] for i in range(chunk.total))
            del self.media[(x, chunk.file_id)]
            self.media_complete.append((now, x, chunk.file_id, data))
            self._event(now, "media-complete", f"{x}:{chunk.file_id}:{len(data)}")

    # -- ARQ -----------------------------------------------------------------

    def on_arq(self, df: DataField, now: int) -> tuple[list[Transmit], bool]:
        """Returns the responses to send and whether to forward the ARQ."""
        try:
            origin, seq = decode_arq(df.body)
        except WireError:
            self.counters["bad-body"] += 1
            return [], False
        self.counters["arq-rx"] += 1
        if not self.can_transmit:
            return [], False
        key = (origin, seq)
        if origin == self.me:
            item = self.cache.get(key)
            if item is None:
                self._event(now, "arq-cache-miss", f"{origin}:{seq}")
                return [], False
            if key in self.answered:
                return [], False
            self.answered[key] = now
            self.counters["arq-answer"] += 1
            return [Transmit(item[1], self.label(item[0]))], False
        if not self.cds:
            return [], False
        item = self.cache.get(key)
        if item is None:
            return [], True
        if key not in self.answered:
            self.answered[key] = now
            self.counters["arq-answer"] += 1
            inner = item[0]
            # resealed under our own marker; the payload keeps the true originator
            return [Transmit(self._seal(inner), f"{self.label(inner)}:via{self.me}")], False
        return [], False

    def poll(self, now: int) -> list[Transmit]:
        """Timer work: expiry, due ARQs, demute deadline, overdue peers."""
        if self.stopped:
            return []
        out: list[Transmit] = []
        self.expire(now)
        if self.muted and self.demute_deadline is not None and now > self.demute_deadline:
            return self._fail(now)
        if self.can_transmit:
            for key in sorted(self.pending_arq):
                due, tries = self.pending_arq[key]
                if self.ledger.has_seen(*key) or key[0] in self.column.revoked:
                    del self.pending_arq[key]
                    continue
                if now < due:
                    continue
                if tries >= self.config.arq_max_retries:
                    del self.pending_arq[key]
                    self._event(now, "arq-give-up", f"{key[0]}:{key[1]}")
                    continue
                out += self.originate(Subtype.ARQ, encode_arq(*key), now)
                self.pending_arq[key] = [now + self.config.arq_timeout, tries + 1]
                self.arq_log.append((now, *key))
        for x, pm in sorted(self.peer_mutes.items()):
            if pm.until is not None and not pm.flagged and now > pm.until:
                pm.flagged = True
                self._event(now, "mute-overdue", str(x))
                if (self.me == self.config.leader and self.config.auto_repudiate_overdue
                        and self.can_transmit and x != self.me):
                    out += self.repudiate(x, now)
        return out

    def next_wakeup(self) -> int | None:
        times = []
        if self.stopped:
            return None
        if self.can_transmit:
            times += [due for due, _ in self.pending_arq.values()]
        if self.muted and self.demute_deadline is not None:
            times.append(self.demute_deadline + 1)
        times += [pm.until + 1 for pm in self.peer_mutes.values() if pm.until is not None and not pm.flagged]
        return min(times) if times else None

    # -- mute / fail ---------------------------------------------------------

    def set_mute(self, on: bool, now: int, offset: int | None = None) -> list[Transmit]:
        """Enter mute (announcing it first) or start the demute password window."""
        if not on:
            if self.muted and self.demute_deadline is None:
                self.demute_deadline = now + self.config.demute_window
            return []
        if self.muted or self.stopped:
            return []
        out = self.originate(Subtype.MUTE, encode_mute(offset), now)
        self.muted = True
        self.demute_deadline = None
        self._event(now, "muted", "" if offset is None else str(offset))
        return out

    def demute(self, attempt: str, now: int) -> tuple[DemuteResult, list[Transmit]]:
        if self.stopped:
            return DemuteResult.FAILED, []
        if not self.muted:
            return DemuteResult.OK, []
        if self.demute_deadline is None:
            self.demute_deadline = now + self.config.demute_window
        good = self._pw is None or hmac.compare_digest(_hash_password(attempt), self._pw)
        if good and now <= self.demute_deadline:
            self.muted = False
            self.demute_deadline = None
            self._event(now, "demuted")
            # gaps piled up while muted become due right away
            for entry in self.pending_arq.values():
                entry[0] = min(entry[0], now)
            return DemuteResult.OK, self.poll(now)
        if now >= self.demute_deadline:
            return DemuteResult.FAILED, self._fail(now)
        self._event(now, "bad-password")
        return DemuteResult.RETRY, []

    def _fail(self, now: int) -> list[Transmit]:
        self.muted = False
        out = self.originate(Subtype.FAIL, b"", now)
        self.wipe(now)
        return out

    def wipe(self, now: int) -> None:
        self.stopped = True
        self.column = None
        self.tables.clear()
        self.ledger.clear()
        self.arq_ledger.clear()
        self.timestamps.clear()
        self.directory.clear()
        self.cache.clear()
        self.pending_arq.clear()
        self.answered.clear()
        self.peer_mutes.clear()
        self.positions.clear()
        self.media.clear()
        self.media_complete.clear()
        self.delivered.clear()
        self.cds = False
        self._event(now, "wiped")

    # -- repudiation ---------------------------------------------------------

    def repudiate(self, member: int, now: int) -> list[Transmit]:
        if self.me != self.config.leader:
            raise NotLeader(f"node {self.me} is not the leader")
        self._revoke(member, now)
        return self.originate(Subtype.REPUDIATION, encode_member(member), now)

    def on_repudiation(self, issuer: int, member: int, now: int) -> None:
        if issuer != self.config.leader:
            self._event(now, "repudiation-ignored", f"{issuer}->{member}")
            return
        if member in self.column.revoked or member == self.me:
            return
        self._revoke(member, now)

    def _revoke(self, member: int, now: int) -> None:
        self.column = crypto.repudiate(self.column, member)
        self.tables.forget(member)
        for key in [k for k in self.pending_arq if k[0] == member]:
            del self.pending_arq[key]
        self._event(now, "revoked", str(member))
        self.recompute_cds(now)
