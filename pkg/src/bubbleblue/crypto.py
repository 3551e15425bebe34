"""Key matrix privacy layer.

The leader draws an n x n matrix of 16-byte AES keys and hands member j the
j-th column. A packet carries one 16-byte header field per member followed by
the data encrypted under a fresh per-packet key K:

* the originator's own field is the all-ones marker,
* a revoked member's field is all zeros,
* every other field i is K wrapped (one raw AES block) under the pairwise key.

The pairwise key between i and j must be readable from both columns, so the
matrix is symmetric: K[i][j] == K[j][i].

Integrity is a CRC32 of the plaintext placed inside the encryption. It only
detects a wrong key or corruption; it is not a MAC.
"""

from __future__ import annotations

import hashlib
import os
import struct
import zlib
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

KEY_SIZE = 16
MARKER = b"\xff" * KEY_SIZE
ZERO_FIELD = bytes(KEY_SIZE)
MAX_MEMBERS = 50
CHECKSUM_SIZE = 4

COLUMN_MAGIC = b"BBKC"
COLUMN_VERSION = 1

_CTR_NONCE = bytes(16)


class CryptoError(Exception):
    pass


class MalformedPacket(CryptoError):
    """No originator marker, or wrong header size."""


class AmbiguousOriginator(CryptoError):
    pass


class RevokedOriginator(CryptoError):
    pass


class SelfFieldZero(CryptoError):
    """The originator zeroed our field: we have been repudiated."""


class ChecksumMismatch(CryptoError):
    pass


class OwnerRevoked(CryptoError):
    pass


class OwnPacket(CryptoError):
    """A member cannot open packets it sealed itself."""


def _ecb(key: bytes):
    return Cipher(algorithms.AES(key), modes.ECB())


def wrap_key(kek: bytes, key: bytes) -> bytes:
    e = _ecb(kek).encryptor()
    return e.update(key) + e.finalize()


def unwrap_key(kek: bytes, blob: bytes) -> bytes:
    d = _ecb(kek).decryptor()
    return d.update(blob) + d.finalize()


def _ctr(key: bytes, data: bytes) -> bytes:
    c = Cipher(algorithms.AES(key), modes.CTR(_CTR_NONCE)).encryptor()
    return c.update(data) + c.finalize()


def _stream(seed, nbytes: int) -> bytes:
    if seed is None:
        return os.urandom(nbytes)
    if isinstance(seed, int):
        seed = seed.to_bytes(16, "big", signed=True)
    elif isinstance(seed, str):
        seed = seed.encode()
    return hashlib.shake_256(b"bubbleblue-keys" + bytes(seed)).digest(nbytes)


@dataclass(frozen=True)
class KeyMatrix:
    n: int
    keys: tuple[tuple[bytes, ...], ...]

    def pairwise(self, i: int, j: int) -> bytes:
        return self.keys[i][j]


def generate_matrix(n: int, seed=None, max_members: int = MAX_MEMBERS) -> KeyMatrix:
    """Symmetric matrix of random 16-byte keys.

    ``seed=None`` uses the OS CSPRNG; an int/bytes seed expands through
    SHAKE-256 so that fixtures are reproducible.
    """
    if not 2 <= n <= max_members:
        raise ValueError(f"member count must be in [2, {max_members}], got {n}")
    raw = _stream(seed, n * n * KEY_SIZE)
    drawn = [[raw[(i * n + j) * KEY_SIZE:(i * n + j + 1) * KEY_SIZE] for j in range(n)] for i in range(n)]
    keys = [[drawn[min(i, j)][max(i, j)] for j in range(n)] for i in range(n)]
    return KeyMatrix(n, tuple(tuple(row) for row in keys))


@dataclass(frozen=True)
class KeyColumn:
    owner: int
    column: tuple[bytes, ...]
    revoked: frozenset[int] = frozenset()

    @property
    def n(self) -> int:
        return len(self.column)

    def to_bytes(self) -> bytes:
        n = self.n
        bitmap = bytearray((n + 7) // 8)
        for m in self.revoked:
            bitmap[m // 8] |= 1 << (m % 8)
        return (COLUMN_MAGIC + bytes([COLUMN_VERSION]) + struct.pack(">HH", n, self.owner)
                + b"".join(self.column) + bytes(bitmap))

    @classmethod
    def from_bytes(cls, data: bytes) -> KeyColumn:
        if data[:4] != COLUMN_MAGIC:
            raise ValueError("not a key column file")
        if data[4] != COLUMN_VERSION:
            raise ValueError(f"unsupported column version {data[4]}")
        n, owner = struct.unpack(">HH", data[5:9])
        body = data[9:]
        need = n * KEY_SIZE + (n + 7) // 8
        if len(body) != need or owner >= n:
            raise ValueError("corrupt key column file")
        column = tuple(body[i * KEY_SIZE:(i + 1) * KEY_SIZE] for i in range(n))
        bitmap = body[n * KEY_SIZE:]
        revoked = frozenset(m for m in range(n) if bitmap[m // 8] >> (m % 8) & 1)
        return cls(owner, column, revoked)


def column_for(m: KeyMatrix, j: int) -> KeyColumn:
    if not 0 <= j < m.n:
        raise IndexError(f"member {j} out of range for n={m.n}")
    return KeyColumn(j, tuple(m.keys[i][j] for i in range(m.n)))


def repudiate(col: KeyColumn, member: int) -> KeyColumn:
    if not 0 <= member < col.n:
        raise IndexError(f"member {member} out of range for n={col.n}")
    if member in col.revoked:
        return col
    return KeyColumn(col.owner, col.column, col.revoked | {member})


@dataclass(frozen=True)
class SealedPacket:
    key_fields: tuple[bytes, ...]
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        return b"".join(self.key_fields) + self.ciphertext

    @classmethod
    def from_bytes(cls, data: bytes, n: int) -> SealedPacket:
        head = n * KEY_SIZE
        if len(data) < head:
            raise MalformedPacket(f"packet shorter than its {n}-field header")
        return cls(tuple(data[i * KEY_SIZE:(i + 1) * KEY_SIZE] for i in range(n)), data[head:])


def seal(col: KeyColumn, plaintext: bytes, rng=None) -> SealedPacket:
    """Encrypt for every non-revoked member.

    ``rng`` supplies the per-packet key: a callable ``rng(nbytes) -> bytes``
    (e.g. ``random.Random.randbytes``) or None for ``os.urandom``.
    """
    if col.owner in col.revoked:
        raise OwnerRevoked(f"member {col.owner} is revoked")
    if not plaintext:
        raise ValueError("empty plaintext")
    draw = rng if rng is not None else os.urandom
    k = draw(KEY_SIZE)
    # a wrapped key equal to MARKER or ZERO_FIELD has odds 2^-128 per field
    fields = []
    for i, kij in enumerate(col.column):
        if i == col.owner:
            fields.append(MARKER)
        elif i in col.revoked:
            fields.append(ZERO_FIELD)
        else:
            fields.append(wrap_key(kij, k))
    body = struct.pack(">I", zlib.crc32(plaintext)) + plaintext
    return SealedPacket(tuple(fields), _ctr(k, body))


def originator_of(pkt: SealedPacket) -> int:
    marks = [i for i, f in enumerate(pkt.key_fields) if f == MARKER]
    if not marks:
        raise MalformedPacket("no originator marker")
    if len(marks) > 1:
        raise AmbiguousOriginator(f"markers at {marks}")
    return marks[0]


def open_packet(col: KeyColumn, pkt: SealedPacket) -> tuple[int, bytes]:
    """Return ``(originator, plaintext)`` or raise a :class:`CryptoError`."""
    if len(pkt.key_fields) != col.n:
        raise MalformedPacket(f"expected {col.n} key fields, got {len(pkt.key_fields)}")
    origin = originator_of(pkt)
    if origin == col.owner:
        raise OwnPacket("packet sealed by this member")
    if origin in col.revoked:
        raise RevokedOriginator(f"member {origin} is revoked")
    field = pkt.key_fields[col.owner]
    if field == ZERO_FIELD:
        raise SelfFieldZero(f"member {col.owner} was excluded by {origin}")
    k = unwrap_key(col.column[origin], field)
    body = _ctr(k, pkt.ciphertext)
    if len(body) < CHECKSUM_SIZE or struct.unpack(">I", body[:CHECKSUM_SIZE])[0] != zlib.crc32(body[CHECKSUM_SIZE:]):
        raise ChecksumMismatch("integrity check failed")
    return origin, body[CHECKSUM_SIZE:]


def columns(m: KeyMatrix) -> list[KeyColumn]:
    return [column_for(m, j) for j in range(m.n)]
