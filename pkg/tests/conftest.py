import itertools

import numpy as np
import pytest
from hypothesis import settings

from privfair.dealer import Kind
from privfair.files import AuditDataset
from privfair.inference import LOGISTIC_REGRESSION, MLP1, ModelParams
from privfair.oracle import plain_scores
from privfair.ring import FixedPointCodec

settings.register_profile("privfair", max_examples=200, deadline=None)
settings.load_profile("privfair")

CODEC = FixedPointCodec()
SCHEMES = ["2pc", "3pc"]
TOL = 2.0 ** -10
TIE_ZONE = 2.0 ** -12

# enough correlated randomness for any single primitive test
PLENTY = {Kind.TRIPLES: 150_000, Kind.RANDOM_WITH_BITS: 4_000}


def quantize(x):
    return CODEC.decode_array(CODEC.encode_array(np.asarray(x, dtype=np.float64)))


def random_lr(rng, d, scale=0.3) -> ModelParams:
    return ModelParams(LOGISTIC_REGRESSION, d, {"w": quantize(rng.normal(size=d) * scale), "b": quantize(rng.normal(size=1) * 0.2)})


def random_mlp(rng, d, h, c) -> ModelParams:
    params = {
        "w1": quantize(rng.normal(size=(h, d)) * 0.5),
        "b1": quantize(rng.normal(size=h) * 0.2),
        "w2": quantize(rng.normal(size=(c, h)) * 0.5),
        "b2": quantize(rng.normal(size=c) * 0.2),
    }
    return ModelParams(MLP1, d, params, h, c)


def random_dataset(rng, n, d, c=2, p_protected=0.5) -> AuditDataset:
    X = quantize(np.round(rng.normal(size=(n, d)), 3))
    return AuditDataset(X, rng.integers(0, c, n), (rng.random(n) < p_protected).astype(np.int64), c)


def tie_instances(model, X):
    """Indices inside the fixed-point tie zone, with the labels each may take."""
    scores = plain_scores(model, X)
    out = {}
    for i, row in enumerate(scores):
        if model.architecture == LOGISTIC_REGRESSION:
            if abs(float(row)) < TIE_ZONE:
                out[i] = [0, 1]
        else:
            order = sorted(range(len(row)), key=lambda c: (-row[c], c))
            if float(row[order[0]] - row[order[1]]) < TIE_ZONE:
                out[i] = sorted(order[:2])
    return out


def label_candidates(labels, ties):
    """Every labelling the secure path may legitimately produce."""
    idx = sorted(ties)
    for combo in itertools.product(*(ties[i] for i in idx)):
        cand = labels.copy()
        cand[idx] = combo
        yield cand


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
