"""Semi-honest trusted dealer for the offline phase, plus its file format.

File layout: ``b"PFD1"``, scheme tag (u8), kind tag (u8), item count (u32
LE), then 8-byte little-endian limbs in party-major order. Within a
party's block the order is (share component, item, limb). A file may hold
every party's block or a single party's block; the reader tells them apart
by size.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .ring import DTYPE, RING_BITS
from .sharing import Scheme, share

MAGIC = b"PFD1"
_HEADER = struct.Struct("<4sBBI")


class Kind(enum.IntEnum):
    TRIPLES = 0
    RANDOM_BITS = 1
    RANDOM_WITH_BITS = 2

    @property
    def width(self) -> int:
        """Ring elements per item: (a, b, c), a bit, or r plus its 64 bits."""
        return {Kind.TRIPLES: 3, Kind.RANDOM_BITS: 1, Kind.RANDOM_WITH_BITS: 1 + RING_BITS}[self]


@dataclass
class DealerBatch:
    kind: Kind
    scheme: Scheme
    count: int
    shares: dict[int, np.ndarray]  # party id -> (n_parts, count, width)

    def for_party(self, party_id: int) -> "DealerBatch":
        return DealerBatch(self.kind, self.scheme, self.count, {party_id: self.shares[party_id]})

    def to_bytes(self) -> bytes:
        body = b"".join(
            np.ascontiguousarray(self.shares[p], dtype="<u8").tobytes() for p in sorted(self.shares)
        )
        return _HEADER.pack(MAGIC, self.scheme.tag, int(self.kind), self.count) + body

    @classmethod
    def from_bytes(cls, buf: bytes, party_id: int | None = None) -> "DealerBatch":
        if len(buf) < _HEADER.size:
            raise ParseError("dealer file truncated before header end")
        magic, scheme_tag, kind_tag, count = _HEADER.unpack_from(buf)
        if magic != MAGIC:
            raise ParseError(f"bad dealer file magic {magic!r}")
        try:
            scheme, kind = Scheme.from_tag(scheme_tag), Kind(kind_tag)
        except ValueError as exc:
            raise ParseError(str(exc)) from None
        block = scheme.n_parts * count * kind.width * 8
        body = memoryview(buf)[_HEADER.size:]
        if len(body) == block * scheme.n_parties:
            ids = list(scheme.party_ids)
        elif len(body) == block and party_id is not None:
            ids = [party_id]
        else:
            raise ParseError(f"dealer file body of {len(body)} bytes does not match {count} items")
        shares = {}
        for k, pid in enumerate(ids):
            raw = np.frombuffer(body[k * block:(k + 1) * block], dtype="<u8").astype(DTYPE)
            shares[pid] = raw.reshape(scheme.n_parts, count, kind.width)
        if party_id is not None:
            if party_id not in shares:
                raise ParseError(f"dealer file has no block for party {party_id}")
            shares = {party_id: shares[party_id]}
        return cls(kind, scheme, count, shares)


def dealer_gen(kind: Kind, count: int, scheme: Scheme, rng: np.random.Generator) -> DealerBatch:
    """Generate ``count`` items of correlated randomness, shared for every party."""
    kind, scheme = Kind(kind), Scheme(scheme)
    if count < 1:
        raise ValueError("count must be at least 1")
    if kind is Kind.TRIPLES:
        a = rng.integers(0, 1 << 64, size=count, dtype=DTYPE)
        b = rng.integers(0, 1 << 64, size=count, dtype=DTYPE)
        plain = np.stack([a, b, a * b], axis=1)
    elif kind is Kind.RANDOM_BITS:
        plain = rng.integers(0, 2, size=(count, 1), dtype=DTYPE)
    else:
        r = rng.integers(0, 1 << 64, size=count, dtype=DTYPE)
        bits = (r[:, None] >> np.arange(RING_BITS, dtype=DTYPE)) & DTYPE(1)
        plain = np.concatenate([r[:, None], bits], axis=1)
    per_party = share(plain, scheme, rng)
    return DealerBatch(kind, scheme, count, {pid: np.stack(per_party[pid - 1]) for pid in scheme.party_ids})


def write_batch(path, batch: DealerBatch) -> None:
    Path(path).write_bytes(batch.to_bytes())


def read_batch(path, party_id: int | None = None) -> DealerBatch:
    return DealerBatch.from_bytes(Path(path).read_bytes(), party_id)
