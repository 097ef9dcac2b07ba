"""Additive two-party and replicated three-party secret sharing over Z_2^64.

Party ids are 1-based. A party's share is a tuple of ``uint64`` arrays:
one array under ``additive2``, the pair ``(x_i, x_{i+1})`` under
``replicated3``.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import IntegrityError
from .ring import DTYPE, as_ring


class Scheme(str, enum.Enum):
    ADDITIVE2 = "2pc"
    REPLICATED3 = "3pc"

    @property
    def n_parties(self) -> int:
        return 2 if self is Scheme.ADDITIVE2 else 3

    @property
    def n_parts(self) -> int:
        """Ring elements each party stores per shared value."""
        return 1 if self is Scheme.ADDITIVE2 else 2

    @property
    def tag(self) -> int:
        return self.n_parties

    @classmethod
    def from_tag(cls, tag: int) -> "Scheme":
        for scheme in cls:
            if scheme.tag == tag:
                return scheme
        raise ValueError(f"unknown scheme tag {tag}")

    @property
    def party_ids(self) -> tuple[int, ...]:
        return tuple(range(1, self.n_parties + 1))


def random_ring(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 1 << 64, size=shape, dtype=DTYPE)


def share(secret, scheme: Scheme, rng: np.random.Generator) -> list[tuple[np.ndarray, ...]]:
    """Split ``secret`` (array-like of ring elements) into per-party shares.

    Returns a list indexed by ``party_id - 1``.
    """
    scheme = Scheme(scheme)
    secret = np.atleast_1d(as_ring(secret))
    if scheme is Scheme.ADDITIVE2:
        x1 = random_ring(rng, secret.shape)
        return [(x1,), (secret - x1,)]
    x1 = random_ring(rng, secret.shape)
    x2 = random_ring(rng, secret.shape)
    x3 = secret - x1 - x2
    return [(x1, x2), (x2, x3), (x3, x1)]


def public_share(value, scheme: Scheme, party_id: int) -> tuple[np.ndarray, ...]:
    """Canonical sharing of a public value: (c, 0) or (c, 0, 0)."""
    value = np.atleast_1d(as_ring(value))
    zero = np.zeros_like(value)
    if Scheme(scheme) is Scheme.ADDITIVE2:
        return (value.copy() if party_id == 1 else zero,)
    first = value.copy() if party_id == 1 else zero
    second = value.copy() if party_id == 3 else zero.copy()
    return (first, second)


def reconstruct(shares, scheme: Scheme) -> np.ndarray:
    """Recombine all parties' shares (indexed by ``party_id - 1``)."""
    scheme = Scheme(scheme)
    if len(shares) != scheme.n_parties:
        raise IntegrityError(f"expected {scheme.n_parties} shares, got {len(shares)}")
    parts = [tuple(as_ring(p) for p in s) for s in shares]
    if any(len(p) != scheme.n_parts for p in parts):
        raise IntegrityError("share has the wrong number of components for the scheme")
    if scheme is Scheme.ADDITIVE2:
        return parts[0][0] + parts[1][0]
    for i in range(3):
        if not np.array_equal(parts[i][1], parts[(i + 1) % 3][0]):
            raise IntegrityError(f"replicated shares of parties {i + 1} and {(i + 1) % 3 + 1} disagree")
    return parts[0][0] + parts[1][0] + parts[2][0]
