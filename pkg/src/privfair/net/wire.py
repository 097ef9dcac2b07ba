"""Frame layout shared by every transport.

``PFW1`` | session id (16 B) | round (u32 LE) | sender (u8) | payload length
in bytes (u32 LE) | payload (packed little-endian ring elements).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolAbort
from ..ring import pack, unpack

MAGIC = b"PFW1"
HEADER = struct.Struct("<4s16sIBI")
HELLO_ROUND = 0xFFFFFFFF

MODEL_OWNER = 0x41
INVESTIGATOR = 0x42


@dataclass(frozen=True)
class WireMessage:
    session_id: bytes
    round: int
    sender: int
    payload: bytes = b""

    def __post_init__(self):
        if len(self.session_id) != 16:
            raise ValueError("session id must be 16 bytes")
        if len(self.payload) % 8:
            raise ValueError("payload length must be a multiple of 8 bytes")

    @classmethod
    def of(cls, session_id: bytes, round_: int, sender: int, values=None) -> "WireMessage":
        payload = b"" if values is None else pack(np.ravel(values))
        return cls(session_id, round_, sender, payload)

    def values(self) -> np.ndarray:
        return unpack(self.payload)

    def encode(self) -> bytes:
        return HEADER.pack(MAGIC, self.session_id, self.round, self.sender, len(self.payload)) + self.payload

    @classmethod
    def decode(cls, frame: bytes) -> "WireMessage":
        if len(frame) < HEADER.size:
            raise ProtocolAbort("truncated frame")
        magic, sid, rnd, sender, length = HEADER.unpack_from(frame)
        if magic != MAGIC:
            raise ProtocolAbort(f"bad frame magic {magic!r}")
        payload = frame[HEADER.size:]
        if len(payload) != length:
            raise ProtocolAbort(f"frame declares {length} payload bytes but carries {len(payload)}")
        return cls(sid, rnd, sender, bytes(payload))
