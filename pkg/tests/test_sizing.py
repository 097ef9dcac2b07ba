import math

import numpy as np
import pytest

from privfair import sizing
from privfair.dealer import Kind
from privfair.roles import simulate

from conftest import SCHEMES, random_dataset, random_lr, random_mlp

CONFIGS = [
    ("lr", 50, 7, 0, 2, ["dp", "eop", "eod", "gacc"]),
    ("lr", 1, 1, 0, 2, ["gacc", "dp"]),
    ("mlp", 30, 5, 4, 2, ["eop", "eod"]),
    ("mlp", 25, 6, 3, 5, ["eod", "gacc"]),
]


def _build(rng, arch, n, d, h, c):
    model = random_lr(rng, d) if arch == "lr" else random_mlp(rng, d, h, c)
    return model, random_dataset(rng, n, d, c)


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("config", CONFIGS, ids=lambda c: f"{c[0]}-N{c[1]}-C{c[4]}")
def test_formula_equals_consumption(scheme, config):
    arch, n, d, h, c, metrics = config
    model, data = _build(np.random.default_rng(n), arch, n, d, h, c)
    sim = simulate(model, data, metrics, scheme, seed=1)
    cost = sizing.audit(metrics, model.architecture, n, d, h, c)
    for s in sim.sessions.values():
        assert dict(s.consumed) == {k: v for k, v in cost.items(scheme).items() if v}
        assert sum(s.mul_counter.values()) == cost.muls


def test_provision_adds_ten_percent():
    cost = sizing.Cost(muls=1000, random_with_bits=7)
    assert sizing.provision(cost, "2pc") == {Kind.TRIPLES: 1100, Kind.RANDOM_WITH_BITS: 8}
    assert sizing.provision(cost, "3pc") == {Kind.RANDOM_WITH_BITS: 8}
    assert sizing.provision(sizing.Cost(), "2pc") == {}


def test_closed_forms():
    assert sizing.msb(1).muls == 125
    assert sizing.eqz(3, 8) == sizing.Cost(21, 3)
    assert sizing.mul(5) + sizing.trunc(2) == sizing.Cost(5, 2)
    # three classes need 2-bit label equality (one AND per comparison) where binary needs none
    assert sizing.metric("eod", 10, 3, 16).muls == 3 * (sizing.metric("eod", 10, 2, 16).muls + 10 * 2 * 1)


@pytest.mark.parametrize(
    "scheme,config",
    [
        ("3pc", ("mlp", 1024, 64, 64, 10, ["eod", "gacc"])),
        ("2pc", ("lr", 1024, 64, 0, 2, ["dp", "eop", "eod", "gacc"])),
        ("2pc", ("mlp", 1024, 64, 8, 10, ["eod", "gacc"])),
    ],
    ids=["3pc-mlp-max", "2pc-lr-max", "2pc-mlp-wide"],
)
def test_no_exhaustion_at_documented_limits(scheme, config):
    arch, n, d, h, c, metrics = config
    model, data = _build(np.random.default_rng(0), arch, n, d, h, c)
    sim = simulate(model, data, metrics, scheme, seed=2)
    assert sim.report.metrics == metrics
    cost = sizing.audit(metrics, model.architecture, n, d, h, c)
    used = sim.sessions[1].consumed
    for kind, count in sizing.provision(cost, scheme).items():
        assert used[kind] <= count and count == math.ceil(1.1 * used[kind])
