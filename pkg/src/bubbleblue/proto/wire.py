"""Decoded data field and per-subtype body codecs.

Layout (big-endian)::

    kind u8 | subtype u8 | originator u16 | stamp | body_len u16 | body

``stamp`` is a u64 timestamp (microseconds) for control fields and a u32
sequence number for information fields. Unknown subtypes keep their body as
opaque bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum


class WireError(ValueError):
    pass


class Kind(IntEnum):
    CONTROL = 0
    INFORMATION = 1


class Subtype(IntEnum):
    HELLO = 0
    CHAT = 1
    MULTIMEDIA = 2
    TC = 3
    ARQ = 4
    GEO = 5
    MUTE = 6
    FAIL = 7
    REPUDIATION = 8
    ADDITION = 9
    MERGE = 10


CONTROL_SUBTYPES = frozenset({Subtype.HELLO})
INDEFINITE = 0xFFFFFFFFFFFFFFFF

_HEAD = struct.Struct(">BBH")


def subtype_name(code: int) -> str:
    try:
        return Subtype(code).name.lower()
    except ValueError:
        return f"subtype{code}"


@dataclass(frozen=True)
class DataField:
    originator: int
    kind: int
    subtype: int
    stamp: int
    body: bytes = b""

    @property
    def is_control(self) -> bool:
        return self.kind == Kind.CONTROL

    @property
    def seq(self) -> int:
        return self.stamp


def encode_data(d: DataField) -> bytes:
    if d.kind == Kind.CONTROL:
        stamp = struct.pack(">Q", d.stamp)
    elif d.kind == Kind.INFORMATION:
        stamp = struct.pack(">I", d.stamp)
    else:
        raise WireError(f"bad kind {d.kind}")
    if len(d.body) > 0xFFFF:
        raise WireError(f"body of {len(d.body)} bytes does not fit the length field")
    return _HEAD.pack(d.kind, d.subtype, d.originator) + stamp + struct.pack(">H", len(d.body)) + d.body


def decode_data(b: bytes) -> DataField:
    if len(b) < _HEAD.size:
        raise WireError("truncated header")
    kind, subtype, originator = _HEAD.unpack_from(b)
    off = _HEAD.size
    if kind == Kind.CONTROL:
        width, fmt = 8, ">Q"
    elif kind == Kind.INFORMATION:
        width, fmt = 4, ">I"
    else:
        raise WireError(f"bad kind tag {kind}")
    if len(b) < off + width + 2:
        raise WireError("truncated stamp")
    (stamp,) = struct.unpack_from(fmt, b, off)
    off += width
    (blen,) = struct.unpack_from(">H", b, off)
    off += 2
    if len(b) != off + blen:
        raise WireError(f"body length {blen} does not match {len(b) - off} remaining bytes")
    return DataField(originator, kind, subtype, stamp, bytes(b[off:]))


# -- bodies ------------------------------------------------------------------

def _ids(ids) -> bytes:
    ids = list(ids)
    if len(ids) > 0xFF:
        raise WireError("id list longer than 255")
    return bytes([len(ids)]) + b"".join(struct.pack(">H", i) for i in ids)


def _read_ids(b: bytes, off: int) -> tuple[tuple[int, ...], int]:
    if off >= len(b):
        raise WireError("truncated id list")
    count = b[off]
    off += 1
    end = off + 2 * count
    if end > len(b):
        raise WireError("truncated id list")
    return tuple(struct.unpack_from(">H", b, off + 2 * k)[0] for k in range(count)), end


@dataclass(frozen=True)
class Hello:
    sym: tuple[int, ...] = ()
    asym: tuple[int, ...] = ()
    # third list, only sent when the MPR-CDS rule is active
    mprs: tuple[int, ...] | None = None


def encode_hello(h: Hello) -> bytes:
    out = _ids(h.sym) + _ids(h.asym)
    if h.mprs is not None:
        out += _ids(h.mprs)
    return out


def decode_hello(b: bytes) -> Hello:
    sym, off = _read_ids(b, 0)
    asym, off = _read_ids(b, off)
    mprs = None
    if off < len(b):
        mprs, off = _read_ids(b, off)
    if off != len(b):
        raise WireError("trailing bytes in hello")
    return Hello(sym, asym, mprs)


def encode_tc(entries) -> bytes:
    entries = list(entries)
    if len(entries) > 0xFF:
        raise WireError("too many TC entries")
    return bytes([len(entries)]) + b"".join(struct.pack(">HQ", i, ts) for i, ts in entries)


def decode_tc(b: bytes) -> tuple[tuple[int, int], ...]:
    if not b:
        raise WireError("empty TC body")
    count = b[0]
    if len(b) != 1 + 10 * count:
        raise WireError("bad TC body length")
    return tuple(struct.unpack_from(">HQ", b, 1 + 10 * k) for k in range(count))


def encode_arq(origin: int, seq: int) -> bytes:
    return struct.pack(">HI", origin, seq)


def decode_arq(b: bytes) -> tuple[int, int]:
    if len(b) != 6:
        raise WireError("bad ARQ body length")
    return struct.unpack(">HI", b)


def encode_geo(lat: float, lon: float) -> bytes:
    return struct.pack(">dd", lat, lon)


def decode_geo(b: bytes) -> tuple[float, float]:
    if len(b) != 16:
        raise WireError("bad geo body length")
    return struct.unpack(">dd", b)


def encode_mute(offset: int | None) -> bytes:
    """No body when no offset is declared; INDEFINITE for an open-ended mute."""
    return b"" if offset is None else struct.pack(">Q", offset)


def decode_mute(b: bytes) -> int | None:
    if not b:
        return None
    if len(b) != 8:
        raise WireError("bad mute body length")
    return struct.unpack(">Q", b)[0]


def encode_member(member: int) -> bytes:
    return struct.pack(">H", member)


def decode_member(b: bytes) -> int:
    if len(b) != 2:
        raise WireError("bad member body length")
    return struct.unpack(">H", b)[0]


def encode_merge(bridge: int, members) -> bytes:
    return struct.pack(">H", bridge) + _ids(members)


def decode_merge(b: bytes) -> tuple[int, tuple[int, ...]]:
    if len(b) < 3:
        raise WireError("truncated merge body")
    (bridge,) = struct.unpack_from(">H", b)
    members, off = _read_ids(b, 2)
    if off != len(b):
        raise WireError("trailing bytes in merge")
    return bridge, members


_CHUNK = struct.Struct(">IHH")


@dataclass(frozen=True)
class Chunk:
    file_id: int
    index: int
    total: int
    data: bytes


def encode_chunk(c: Chunk) -> bytes:
    return _CHUNK.pack(c.file_id, c.index, c.total) + c.data


def decode_chunk(b: bytes) -> Chunk:
    if len(b) < _CHUNK.size:
        raise WireError("truncated multimedia chunk")
    file_id, index, total = _CHUNK.unpack_from(b)
    if not index < total:
        raise WireError(f"chunk index {index} out of {total}")
    return Chunk(file_id, index, total, bytes(b[_CHUNK.size:]))


def split_media(file_id: int, data: bytes, chunk_size: int) -> list[Chunk]:
    if chunk_size <= 0:
        raise ValueError("chunk size must be positive")
    pieces = [data[i:i + chunk_size] for i in range(0, len(data), chunk_size)] or [b""]
    if len(pieces) > 0xFFFF:
        raise WireError("media too large")
    return [Chunk(file_id, i, len(pieces), p) for i, p in enumerate(pieces)]
