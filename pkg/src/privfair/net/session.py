"""Per-party protocol session: bulk-synchronous rounds, transcript, PRF seeds
and the party's pool of dealer-supplied correlated randomness."""

from __future__ import annotations

import contextlib
import hashlib
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..dealer import DealerBatch, Kind
from ..errors import PreprocessingExhausted, ProtocolAbort
from ..ring import DTYPE, FixedPointCodec
from ..sharing import Scheme
from .transport import Transport
from .wire import WireMessage

_EMPTY = np.zeros(0, dtype=DTYPE)


@dataclass(frozen=True)
class SessionConfig:
    scheme: Scheme
    roster: Mapping[int, str]
    party_id: int
    codec: FixedPointCodec = FixedPointCodec()
    session_id: bytes = bytes(16)
    seed: bytes | None = None
    timeout: float = 30.0
    input_timeout: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        ids = sorted(int(p) for p in self.roster)
        if ids != list(self.scheme.party_ids):
            raise ValueError(f"{self.scheme.value} needs parties {list(self.scheme.party_ids)}, roster has {ids}")
        if self.party_id not in ids:
            raise ValueError(f"party {self.party_id} is not in the roster")
        if len(self.session_id) != 16:
            raise ValueError("session id must be 16 bytes")


@dataclass
class TranscriptEntry:
    direction: str  # "send", "recv" or "event"
    peer: int
    round: int
    kind: str
    label: str
    digest: str = ""

    def line(self) -> str:
        return f"{self.direction} {self.peer} {self.round} {self.kind} {self.label} {self.digest}"


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, direction, peer, round_, kind, label, frame: bytes = b""):
        digest = hashlib.sha256(frame).hexdigest()[:32] if frame else ""
        self.entries.append(TranscriptEntry(direction, peer, round_, kind, label, digest))

    def kinds(self) -> Counter:
        return Counter(e.kind for e in self.entries)

    def to_bytes(self) -> bytes:
        return "".join(e.line() + "\n" for e in self.entries).encode()


class Preprocessing:
    """This party's share of each dealer batch, consumed front to back."""

    def __init__(self, party_id: int, batches=()):
        self.party_id = party_id
        self._pools: dict[Kind, list] = {}
        for batch in batches:
            self.add(batch)

    def add(self, batch: DealerBatch) -> None:
        arr = batch.shares[self.party_id]
        if batch.kind in self._pools:
            old, cur = self._pools[batch.kind]
            arr = np.concatenate([old[:, cur:], arr], axis=1)
        self._pools[batch.kind] = [arr, 0]

    def remaining(self, kind: Kind) -> int:
        if kind not in self._pools:
            return 0
        arr, cur = self._pools[kind]
        return arr.shape[1] - cur

    def take(self, kind: Kind, n: int) -> np.ndarray:
        """Return the next ``n`` items as an array (n_parts, n, width)."""
        have = self.remaining(kind)
        if n > have:
            raise PreprocessingExhausted(f"{kind.name.lower()}: need {n} more items, {have} left")
        pool = self._pools[kind]
        arr, cur = pool
        pool[1] = cur + n
        return arr[:, cur:cur + n]

    def consumed(self) -> dict[Kind, int]:
        return {k: cur for k, (_, cur) in self._pools.items()}


class Session:
    """One party's view of a protocol run among the compute servers."""

    def __init__(self, config: SessionConfig, transport: Transport, preprocessing: Preprocessing | None = None):
        self.config = config
        self.transport = transport
        self.pre = preprocessing if preprocessing is not None else Preprocessing(config.party_id)
        self.round = 0
        self.transcript = Transcript()
        self.mul_counter: Counter = Counter()
        self.div_counter: Counter = Counter()
        self.rounds: Counter = Counter()
        self.consumed: Counter = Counter()
        self._labels = ["main"]
        self._prf_keys: tuple[bytes, bytes] | None = None
        self._prf_calls = 0

    scheme = property(lambda self: self.config.scheme)
    party_id = property(lambda self: self.config.party_id)
    codec = property(lambda self: self.config.codec)
    session_id = property(lambda self: self.config.session_id)

    @property
    def peers(self) -> list[int]:
        return [p for p in self.scheme.party_ids if p != self.party_id]

    @property
    def succ(self) -> int:
        return self.party_id % self.scheme.n_parties + 1

    @property
    def pred(self) -> int:
        return (self.party_id - 2) % self.scheme.n_parties + 1

    @property
    def label(self) -> str:
        return self._labels[-1]

    @contextlib.contextmanager
    def labelled(self, name: str):
        self._labels.append(name)
        try:
            yield
        finally:
            self._labels.pop()

    def exchange(self, outgoing: Mapping[int, np.ndarray], kind: str = "masked") -> dict[int, np.ndarray]:
        """One synchronous round: send to every peer, then receive from every peer."""
        self.round += 1
        rnd = self.round
        for peer in self.peers:
            msg = WireMessage.of(self.session_id, rnd, self.party_id, outgoing.get(peer, _EMPTY))
            frame = msg.encode()
            self.transport.send(peer, msg)
            self.transcript.record("send", peer, rnd, kind, self.label, frame)
        received = {}
        for peer in self.peers:
            try:
                msg = self.transport.recv(peer, self.config.timeout)
            except TimeoutError:
                raise ProtocolAbort(f"round {rnd}: no message from party {peer}") from None
            if msg.session_id != self.session_id:
                raise ProtocolAbort(f"round {rnd}: party {peer} sent a frame for another session")
            if msg.round != rnd:
                raise ProtocolAbort(f"round mismatch: expected round {rnd} from party {peer}, got {msg.round}")
            self.transcript.record("recv", peer, rnd, kind, self.label, msg.encode())
            received[peer] = msg.values()
        self.rounds[self.label] += 1
        return received

    def setup(self) -> None:
        """Distribute PRF seeds: party i ends up holding seeds (s_i, s_{i+1})."""
        if self.scheme is not Scheme.REPLICATED3:
            return
        own = self.config.seed if self.config.seed is not None else os.urandom(16)
        own = hashlib.sha256(own).digest()[:16]
        words = np.frombuffer(own, dtype="<u8").astype(DTYPE)
        got = self.exchange({self.pred: words}, kind="setup")
        self._prf_keys = (own, got[self.succ].astype("<u8").tobytes())

    def _prf(self, key: bytes, shape) -> np.ndarray:
        seq = np.random.SeedSequence([*np.frombuffer(key, dtype="<u4").tolist(), self._prf_calls])
        return np.random.Generator(np.random.Philox(seq)).integers(0, 1 << 64, size=shape, dtype=DTYPE)

    def zero_share(self, shape) -> np.ndarray:
        """This party's component of a fresh pseudorandom sharing of zero."""
        if self._prf_keys is None:
            raise ProtocolAbort("session setup has not run")
        self._prf_calls += 1
        mine, nxt = self._prf_keys
        return self._prf(mine, shape) - self._prf(nxt, shape)

    def take(self, kind: Kind, n: int) -> np.ndarray:
        arr = self.pre.take(kind, n)
        self.consumed[kind] += n
        return arr

    def event(self, kind: str, label: str = "") -> None:
        self.transcript.record("event", self.party_id, self.round, kind, label or self.label)
