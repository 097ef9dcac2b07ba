"""Secure subprotocols over shared ring elements.

Every non-linear step reduces to ``mul`` plus masked openings of ``x + r``
where ``r`` comes from the dealer together with its bit decomposition.
Masked openings reveal a uniformly random value and nothing else.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from ..dealer import Kind
from ..errors import RangeError, ShapeError
from ..ring import DTYPE, RING_BITS
from ..sharing import Scheme
from .shared import Shared

NR_ITERATIONS = 5
NR_INITIAL = 2.9142
MSB_CHUNK = 8192
_ONE = DTYPE(1)


def _labelled(session, label):
    return session.labelled(label) if label else contextlib.nullcontext()


def _bits(values: np.ndarray, m: int) -> np.ndarray:
    return (values[:, None] >> np.arange(m, dtype=DTYPE)) & _ONE


def open_masked(x: Shared, kind: str = "masked") -> np.ndarray:
    """Open ``x`` to every server. Callers only pass masked values."""
    s = x.session
    flat = [p.ravel() for p in x.parts]
    if s.scheme is Scheme.ADDITIVE2:
        other = s.peers[0]
        got = s.exchange({other: flat[0]}, kind)
        value = flat[0] + got[other]
    else:
        got = s.exchange({s.succ: flat[0]}, kind)
        value = flat[0] + flat[1] + got[s.pred]
    return value.reshape(x.shape)


def reveal(x: Shared) -> np.ndarray:
    """Open an unmasked value to all servers; test harness use only."""
    x.session.event("reveal")
    return open_masked(x, kind="reveal")


def take_random_with_bits(session, n: int) -> tuple[Shared, Shared]:
    arr = session.take(Kind.RANDOM_WITH_BITS, n)
    r = Shared(session, tuple(a[:, 0] for a in arr))
    bits = Shared(session, tuple(a[:, 1:] for a in arr))
    return r, bits


def mul(x: Shared, y: Shared, label: str | None = None) -> Shared:
    """Element-wise product of two shared arrays (broadcasting allowed)."""
    s = x.session
    shape = np.broadcast_shapes(x.shape, y.shape)
    if x.shape != shape:
        x = x.broadcast_to(shape)
    if y.shape != shape:
        y = y.broadcast_to(shape)
    n = math.prod(shape)
    with _labelled(s, label):
        s.mul_counter[s.label] += n
        if s.scheme is Scheme.ADDITIVE2:
            t = s.take(Kind.TRIPLES, n)[0]
            a, b, c = t[:, 0], t[:, 1], t[:, 2]
            masked = np.concatenate([x.parts[0].ravel() - a, y.parts[0].ravel() - b])
            other = s.peers[0]
            opened = masked + s.exchange({other: masked}, "masked")[other]
            e, f = opened[:n], opened[n:]
            z = c + e * b + f * a
            if s.party_id == 1:
                z = z + e * f
            return Shared(s, (z.reshape(shape),))
        (x0, x1), (y0, y1) = ([p.ravel() for p in x.parts], [p.ravel() for p in y.parts])
        z = x0 * y0 + x0 * y1 + x1 * y0 + s.zero_share(n)
        nxt = s.exchange({s.pred: z}, "reshare")[s.succ]
        return Shared(s, (z.reshape(shape), nxt.reshape(shape)))


def matmul(x: Shared, y: Shared, label: str = "matmul") -> Shared:
    """Shared (N, k) @ shared (k, p) or (k,)."""
    s = x.session
    vector = len(y.shape) == 1
    if vector:
        y = y.reshape(-1, 1)
    if len(x.shape) != 2 or x.shape[1] != y.shape[0]:
        raise ShapeError(f"cannot multiply shapes {x.shape} and {y.shape}")
    rows, inner, cols = x.shape[0], x.shape[1], y.shape[1]
    if s.scheme is Scheme.ADDITIVE2:
        prod = mul(x.reshape(rows, inner, 1), y.reshape(1, inner, cols), label=label)
        out = prod.sum(axis=1)
    else:
        with s.labelled(label):
            s.mul_counter[s.label] += rows * inner * cols
            (x0, x1), (y0, y1) = x.parts, y.parts
            z = x0 @ y0 + x0 @ y1 + x1 @ y0 + s.zero_share((rows, cols))
            nxt = s.exchange({s.pred: z}, "reshare")[s.succ]
            out = Shared(s, (z, nxt.reshape(rows, cols)))
    return out.reshape(rows) if vector else out


def trunc(x: Shared, bits: int | None = None) -> Shared:
    """Shift right by ``bits`` (default: the codec's fractional bits).

    Result is floor(x / 2^bits) or one more (a borrow out of the low bits
    that are dropped), so exact multiples come out exact. Requires |x| < 2^62.
    """
    s = x.session
    f = s.codec.frac_bits if bits is None else bits
    if f == 0:
        return x
    if not 0 < f < 62:
        raise RangeError(f"cannot truncate by {f} bits")
    r, rb = take_random_with_bits(s, x.size)
    with s.labelled("trunc"):
        c = open_masked(x.ravel().add_public(1 << 62) + r)
    weights = np.zeros(RING_BITS, dtype=DTYPE)
    weights[f:] = _ONE << np.arange(RING_BITS - f, dtype=DTYPE)
    r_high = (rb * weights).sum(axis=1)
    wrap = rb[:, RING_BITS - 1] * (_ONE - (c >> DTYPE(63)))
    out = wrap * (1 << (RING_BITS - f)) - r_high
    out = out.add_public(c >> DTYPE(f)).add_public(-(1 << (62 - f)))
    return out.reshape(x.shape)


def fx_mul(x: Shared, y: Shared) -> Shared:
    return trunc(mul(x, y))


def _and_all(d: Shared) -> Shared:
    """AND across the last axis with a log-depth tree of products."""
    while d.shape[-1] > 1:
        width = d.shape[-1]
        half = width // 2
        prod = mul(d[:, :half], d[:, half:2 * half])
        d = Shared.concat([prod, d[:, 2 * half:]], axis=1) if width % 2 else prod
    return d[:, 0]


def eqz(x: Shared, bits: int = 32) -> Shared:
    """Shared bit: 1 iff x == 0, for |x| < 2^bits."""
    if not 1 <= bits <= 62:
        raise RangeError(f"equality bound must be in [1, 62] bits, got {bits}")
    s = x.session
    r, rb = take_random_with_bits(s, x.size)
    with s.labelled("eq"):
        c = open_masked(x.ravel() + r)
        cb = _bits(c, bits)
        same = (rb[:, :bits] * (DTYPE(2) * cb - _ONE)).add_public(_ONE - cb)
        out = _and_all(same)
    return out.reshape(x.shape)


def eq_public(x: Shared, c: int, bits: int = 32) -> Shared:
    """Shared bit: 1 iff x == c, for x and c in [0, 2^bits)."""
    if not 0 <= c < (1 << bits):
        raise RangeError(f"public constant {c} outside [0, 2^{bits})")
    return eqz(x - c, bits)


def _borrow_out(g: Shared, p: Shared) -> Shared:
    """Combine (generate, propagate) pairs over the last axis, low bit first."""
    while g.shape[-1] > 1:
        width = g.shape[-1]
        odd = width % 2
        half = width // 2
        lo = np.arange(odd, width - 1, 2)
        hi = lo + 1
        prod = mul(Shared.concat([p[:, hi], p[:, hi]], axis=1), Shared.concat([g[:, lo], p[:, lo]], axis=1))
        g_new = g[:, hi] + prod[:, :half]
        p_new = prod[:, half:]
        if odd:
            g_new = Shared.concat([g[:, :1], g_new], axis=1)
            p_new = Shared.concat([p[:, :1], p_new], axis=1)
        g, p = g_new, p_new
    return g[:, 0]


def _borrow_prefix(g: Shared, p: Shared) -> Shared:
    """All prefix combinations; column j is the borrow out of bit j."""
    width = g.shape[-1]
    dist = 1
    while dist < width:
        k = width - dist
        prod = mul(Shared.concat([p[:, dist:], p[:, dist:]], axis=1), Shared.concat([g[:, :k], p[:, :k]], axis=1))
        g = Shared.concat([g[:, :dist], g[:, dist:] + prod[:, :k]], axis=1)
        p = Shared.concat([p[:, :dist], prod[:, k:]], axis=1)
        dist *= 2
    return g


def msb(x: Shared) -> Shared:
    """Shared bit: 1 iff x is negative in two's complement.

    Large inputs run in chunks to bound the (n, 64) bit matrices in memory.
    """
    if x.size > MSB_CHUNK:
        flat = x.ravel()
        parts = [_msb(flat[i:i + MSB_CHUNK]) for i in range(0, flat.size, MSB_CHUNK)]
        return Shared.concat(parts).reshape(x.shape)
    return _msb(x)


def _msb(x: Shared) -> Shared:
    s = x.session
    r, rb = take_random_with_bits(s, x.size)
    with s.labelled("msb"):
        c = open_masked(x.ravel() + r)
        cb = _bits(c, RING_BITS)
        low_c, low_r = cb[:, :-1], rb[:, :-1]
        gen = low_r * (_ONE - low_c)
        prop = (low_r * (DTYPE(2) * low_c - _ONE)).add_public(_ONE - low_c)
        borrow = _borrow_out(gen, prop)
        top = cb[:, -1]
        t = (rb[:, -1] * (_ONE - DTYPE(2) * top)).add_public(top)
        out = t + borrow - mul(t, borrow) * 2
    return out.reshape(x.shape)


def bit_decompose(x: Shared, bits: int) -> Shared:
    """Shared bits (little-endian, new last axis) of x in [0, 2^bits)."""
    if not 1 <= bits <= 62:
        raise RangeError(f"bit length must be in [1, 62], got {bits}")
    s = x.session
    r, rb = take_random_with_bits(s, x.size)
    with s.labelled("bitdec"):
        c = open_masked(x.ravel() + r)
        cb = _bits(c, bits)
        low_r = rb[:, :bits]
        diff = (low_r * (_ONE - DTYPE(2) * cb)).add_public(cb)
        if bits == 1:
            return diff.reshape(x.shape + (1,))
        gen = low_r * (_ONE - cb)
        prop = (-diff).add_public(1)
        borrow = _borrow_prefix(gen[:, :-1], prop[:, :-1])
        upper = diff[:, 1:] + borrow - mul(diff[:, 1:], borrow) * 2
        out = Shared.concat([diff[:, :1], upper], axis=1)
    return out.reshape(x.shape + (bits,))


def suffix_or(bits: Shared) -> Shared:
    """Column j becomes OR of columns j..end (log-depth scan)."""
    o = bits[:, ::-1]
    width = o.shape[-1]
    dist = 1
    while dist < width:
        k = width - dist
        prod = mul(o[:, dist:], o[:, :k])
        o = Shared.concat([o[:, :dist], o[:, dist:] + o[:, :k] - prod], axis=1)
        dist *= 2
    return o[:, ::-1]


def div(num: Shared, den: Shared, bits: int = 20, iterations: int = NR_ITERATIONS) -> Shared:
    """Fixed-point quotient of non-negative integers num / den, den < 2^bits.

    den is scaled into [0.5, 1) by its leading bit, inverted by Newton-Raphson
    and the scale is undone after multiplying by num. den == 0 yields 0.
    """
    s = num.session
    f = s.codec.frac_bits
    if not 1 <= bits <= (62 - f) // 2:
        raise RangeError(f"denominator bound of {bits} bits is unsupported with {f} fractional bits")
    if num.shape != den.shape:
        raise ShapeError(f"numerator {num.shape} and denominator {den.shape} differ")
    shape = den.shape
    num, den = num.ravel(), den.ravel()
    s.div_counter[s.label] += den.size
    with s.labelled("div"):
        lead = suffix_or(bit_decompose(den, bits))
        onehot = lead - Shared.concat([lead[:, 1:], Shared.zeros(s, (den.size, 1))], axis=1)
        weights = _ONE << np.arange(bits - 1, -1, -1, dtype=DTYPE)
        scale = (onehot * weights).sum(axis=1)
        scaled = mul(den, scale)
        norm = scaled * (1 << (f - bits)) if bits <= f else trunc(scaled, bits - f)
        w = (norm * -2).add_public(s.codec.encode(NR_INITIAL))
        two = 2 << f
        for _ in range(iterations):
            err = trunc(mul(norm, w))
            w = trunc(mul(w, (-err).add_public(two)))
        q = trunc(mul(mul(num, w), scale), bits)
    return q.reshape(shape)
