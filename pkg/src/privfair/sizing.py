"""Closed-form preprocessing demand of an audit, mirroring the protocols
item for item so a dealer can be provisioned before any input exists."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .audit import count_bits, label_bits
from .dealer import Kind
from .inference import LOGISTIC_REGRESSION
from .mpc.primitives import NR_ITERATIONS
from .ring import RING_BITS
from .sharing import Scheme

MARGIN = 0.10


@dataclass(frozen=True)
class Cost:
    muls: int = 0
    random_with_bits: int = 0

    def __add__(self, other: "Cost") -> "Cost":
        return Cost(self.muls + other.muls, self.random_with_bits + other.random_with_bits)

    def __mul__(self, k: int) -> "Cost":
        return Cost(self.muls * k, self.random_with_bits * k)

    __rmul__ = __mul__

    def items(self, scheme: Scheme) -> dict[Kind, int]:
        """Dealer items consumed; replicated sharing multiplies without triples."""
        out = {Kind.RANDOM_WITH_BITS: self.random_with_bits}
        if Scheme(scheme) is Scheme.ADDITIVE2:
            out[Kind.TRIPLES] = self.muls
        return out


def mul(n: int) -> Cost:
    return Cost(muls=n)


def opening(n: int) -> Cost:
    return Cost(random_with_bits=n)


trunc = opening


def eqz(n: int, bits: int) -> Cost:
    return opening(n) + mul(n * (bits - 1))


def _borrow_out_muls(width: int) -> int:
    total = 0
    while width > 1:
        half = width // 2
        total += 2 * half
        width = half + width % 2
    return total


def _scan_muls(width: int, per_step: int) -> int:
    total, dist = 0, 1
    while dist < width:
        total += per_step * (width - dist)
        dist *= 2
    return total


def msb(n: int) -> Cost:
    return opening(n) + mul(n * (_borrow_out_muls(RING_BITS - 1) + 1))


def bit_decompose(n: int, bits: int) -> Cost:
    if bits == 1:
        return opening(n)
    return opening(n) + mul(n * (_scan_muls(bits - 1, 2) + bits - 1))


def suffix_or(n: int, bits: int) -> Cost:
    return mul(n * _scan_muls(bits, 1))


def div(n: int, bits: int, frac_bits: int) -> Cost:
    cost = bit_decompose(n, bits) + suffix_or(n, bits) + mul(n)
    if bits > frac_bits:
        cost += trunc(n)
    cost += NR_ITERATIONS * (mul(2 * n) + trunc(2 * n))
    return cost + mul(2 * n) + trunc(n)


def matmul(rows: int, inner: int, cols: int) -> Cost:
    return mul(rows * inner * cols)


def relu(n: int) -> Cost:
    return msb(n) + mul(n)


def argmax(n: int, classes: int) -> Cost:
    return (classes - 1) * (msb(n) + mul(2 * n))


def inference(architecture: str, n: int, d: int, hidden: int = 0, classes: int = 2) -> Cost:
    if architecture == LOGISTIC_REGRESSION:
        return matmul(n, d, 1) + msb(n)
    return matmul(n, d, hidden) + trunc(n * hidden) + relu(n * hidden) + matmul(n, hidden, classes) + argmax(n, classes)


def _class_counts(n: int, classes: int, with_negatives: bool = True) -> Cost:
    return eqz(2 * n, label_bits(classes)) + mul((3 if with_negatives else 2) * n) + mul(n)


def _ratios(k: int, n: int, frac_bits: int) -> Cost:
    bits = count_bits(n)
    return div(k, bits, frac_bits) + eqz(k, bits)


def metric(kind: str, n: int, classes: int, frac_bits: int) -> Cost:
    if kind == "eod":
        per_class = _class_counts(n, classes) + _ratios(4, n, frac_bits)
        return (1 if classes == 2 else classes) * per_class
    if kind == "eop":
        return _class_counts(n, classes, False) + _ratios(2, n, frac_bits)
    if kind == "dp":
        return _class_counts(n, classes) + _ratios(2, n, frac_bits)
    if kind == "gacc":
        return eqz(n, label_bits(classes)) + mul(n) + _ratios(2, n, frac_bits) + trunc(1)
    raise ValueError(f"unknown metric {kind!r}")


def audit(metrics, architecture: str, n: int, d: int, hidden: int = 0, classes: int = 2, frac_bits: int = 16) -> Cost:
    cost = inference(architecture, n, d, hidden, classes)
    for kind in metrics:
        cost += metric(kind, n, classes, frac_bits)
    return cost


def provision(cost: Cost, scheme: Scheme, margin: float = MARGIN) -> dict[Kind, int]:
    """Dealer batch sizes: demand plus ``margin`` headroom, empty kinds dropped."""
    return {k: math.ceil(v * (1 + margin)) for k, v in cost.items(scheme).items() if v > 0}
