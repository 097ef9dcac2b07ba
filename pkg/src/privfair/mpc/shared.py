"""Party-local handle on a secret-shared array and its local (free) operations."""

from __future__ import annotations

import numpy as np

from ..ring import DTYPE, as_ring
from ..sharing import Scheme, public_share


def _public(value) -> np.ndarray:
    return as_ring(value)


class Shared:
    """This party's share of a secret array.

    ``parts`` holds one uint64 array (additive) or the replicated pair.
    Linear operations and products with public values are local; anything
    that multiplies two secrets lives in :mod:`privfair.mpc.primitives`.
    """

    __slots__ = ("session", "parts")

    def __init__(self, session, parts):
        self.session = session
        self.parts = tuple(np.asarray(p, dtype=DTYPE) for p in parts)

    @classmethod
    def public(cls, session, value) -> "Shared":
        value = np.asarray(_public(value))
        parts = public_share(value, session.scheme, session.party_id)
        return cls(session, tuple(p.reshape(value.shape) for p in parts))

    @classmethod
    def zeros(cls, session, shape) -> "Shared":
        return cls(session, tuple(np.zeros(shape, dtype=DTYPE) for _ in range(session.scheme.n_parts)))

    @classmethod
    def concat(cls, items, axis: int = 0) -> "Shared":
        items = list(items)
        n = len(items[0].parts)
        return cls(items[0].session, tuple(np.concatenate([x.parts[k] for x in items], axis=axis) for k in range(n)))

    @classmethod
    def stack(cls, items, axis: int = 0) -> "Shared":
        items = list(items)
        n = len(items[0].parts)
        return cls(items[0].session, tuple(np.stack([x.parts[k] for x in items], axis=axis) for k in range(n)))

    def _map(self, fn) -> "Shared":
        return Shared(self.session, tuple(fn(p) for p in self.parts))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.parts[0].shape

    @property
    def size(self) -> int:
        return self.parts[0].size

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx) -> "Shared":
        return self._map(lambda p: p[idx])

    def reshape(self, *shape) -> "Shared":
        return self._map(lambda p: p.reshape(*shape))

    def ravel(self) -> "Shared":
        return self._map(np.ravel)

    @property
    def T(self) -> "Shared":
        return self._map(lambda p: p.T)

    def broadcast_to(self, shape) -> "Shared":
        return self._map(lambda p: np.ascontiguousarray(np.broadcast_to(p, shape)))

    def sum(self, axis=None) -> "Shared":
        return self._map(lambda p: np.sum(p, axis=axis, dtype=DTYPE))

    def _check(self, other: "Shared"):
        if other.session is not self.session:
            raise ValueError("shares belong to different sessions")

    def __add__(self, other) -> "Shared":
        if isinstance(other, Shared):
            self._check(other)
            return Shared(self.session, tuple(a + b for a, b in zip(self.parts, other.parts)))
        return self.add_public(other)

    __radd__ = __add__

    def __neg__(self) -> "Shared":
        return self._map(lambda p: DTYPE(0) - p)

    def __sub__(self, other) -> "Shared":
        if isinstance(other, Shared):
            self._check(other)
            return Shared(self.session, tuple(a - b for a, b in zip(self.parts, other.parts)))
        return self.add_public(np.subtract(DTYPE(0), _public(other), dtype=DTYPE))

    def __rsub__(self, other) -> "Shared":
        return (-self).add_public(other)

    def __mul__(self, other) -> "Shared":
        if isinstance(other, Shared):
            raise TypeError("multiplying two shared values needs a protocol; use primitives.mul")
        c = _public(other)
        return self._map(lambda p: p * c)

    __rmul__ = __mul__

    def add_public(self, value) -> "Shared":
        """Add a public constant through its canonical sharing."""
        c = _public(value)
        pid = self.session.party_id
        scheme = self.session.scheme
        parts = list(self.parts)
        if pid == 1:
            parts[0] = parts[0] + c
        if scheme is Scheme.REPLICATED3 and pid == 3:
            parts[1] = parts[1] + c
        if np.shape(c) and np.shape(c) != self.shape:
            parts = [np.ascontiguousarray(np.broadcast_to(p, np.broadcast_shapes(p.shape, np.shape(c)))) for p in parts]
        return Shared(self.session, parts)

    def __repr__(self):
        return f"Shared(party={self.session.party_id}, shape={self.shape})"

