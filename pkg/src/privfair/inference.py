"""Labeling secret-shared audit instances with a secret-shared model.

Only labels are produced: logistic regression thresholds the score at 0
(equivalent to sigmoid >= 0.5) and the MLP takes an argmax over logits, so
no sigmoid or softmax is ever evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .mpc.primitives import matmul, msb, mul, trunc
from .mpc.shared import Shared

LOGISTIC_REGRESSION = "logistic_regression"
MLP1 = "mlp1"
ARCHITECTURES = (LOGISTIC_REGRESSION, MLP1)
MAX_HIDDEN = 64


def param_shapes(architecture: str, n_features: int, hidden: int = 0, n_classes: int = 2):
    """Ordered (name, shape) layout used for flattening and submission."""
    if architecture == LOGISTIC_REGRESSION:
        return [("w", (n_features,)), ("b", (1,))]
    if architecture == MLP1:
        return [
            ("w1", (hidden, n_features)),
            ("b1", (hidden,)),
            ("w2", (n_classes, hidden)),
            ("b2", (n_classes,)),
        ]
    raise ShapeError(f"unknown architecture {architecture!r}")


@dataclass
class ModelParams:
    """Plaintext model as held by the model owner."""

    architecture: str
    n_features: int
    params: dict[str, np.ndarray]
    hidden: int = 0
    n_classes: int = 2

    def __post_init__(self):
        if self.architecture == LOGISTIC_REGRESSION and self.n_classes != 2:
            raise ShapeError("logistic regression is binary")
        if self.architecture == MLP1 and not (1 <= self.hidden <= MAX_HIDDEN and self.n_classes >= 2):
            raise ShapeError(f"mlp1 needs 1 <= hidden <= {MAX_HIDDEN} and at least 2 classes")
        for name, shape in self.layout():
            if name not in self.params:
                raise ShapeError(f"missing parameter {name}")
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError(f"parameter {name} has shape {arr.shape}, expected {shape}")
            self.params[name] = arr

    def layout(self):
        return param_shapes(self.architecture, self.n_features, self.hidden, self.n_classes)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.params[name].ravel() for name, _ in self.layout()])

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layout())


@dataclass
class SharedModel:
    architecture: str
    n_features: int
    params: dict[str, Shared]
    hidden: int = 0
    n_classes: int = 2

    @classmethod
    def from_flat(cls, architecture, n_features, hidden, n_classes, flat: Shared) -> "SharedModel":
        params, at = {}, 0
        for name, shape in param_shapes(architecture, n_features, hidden, n_classes):
            size = int(np.prod(shape))
            if at + size > flat.size:
                raise ShapeError("model submission is shorter than its declared dimensions")
            params[name] = flat[at:at + size].reshape(shape)
            at += size
        if at != flat.size:
            raise ShapeError("model submission is longer than its declared dimensions")
        return cls(architecture, n_features, params, hidden, n_classes)


def _check_features(model: SharedModel, X: Shared):
    if len(X.shape) != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"dataset has shape {X.shape}, model expects {model.n_features} features")


def infer_lr(model: SharedModel, X: Shared) -> Shared:
    _check_features(model, X)
    scale = 1 << X.session.codec.frac_bits
    score = matmul(X, model.params["w"]) + model.params["b"] * scale
    return (-msb(score)).add_public(1)


def relu(z: Shared) -> Shared:
    return mul(z, (-msb(z)).add_public(1), label="relu")


def argmax(logits: Shared) -> Shared:
    """Shared index of the largest column per row; ties go to the lower index."""
    s = logits.session
    n, classes = logits.shape
    vals = [logits[:, c] for c in range(classes)]
    idxs = [Shared.public(s, np.full(n, c, dtype=np.uint64)) for c in range(classes)]
    with s.labelled("argmax"):
        while len(vals) > 1:
            pairs = len(vals) // 2
            left_v = Shared.stack(vals[0:2 * pairs:2])
            right_v = Shared.stack(vals[1:2 * pairs:2])
            left_i = Shared.stack(idxs[0:2 * pairs:2])
            right_i = Shared.stack(idxs[1:2 * pairs:2])
            right_wins = msb(left_v - right_v)
            picked = mul(Shared.concat([right_wins, right_wins]), Shared.concat([right_v - left_v, right_i - left_i]))
            new_v = left_v + picked[:pairs]
            new_i = left_i + picked[pairs:]
            tail_v, tail_i = vals[2 * pairs:], idxs[2 * pairs:]
            vals = [new_v[k] for k in range(pairs)] + tail_v
            idxs = [new_i[k] for k in range(pairs)] + tail_i
    return idxs[0]


def infer_mlp(model: SharedModel, X: Shared) -> Shared:
    _check_features(model, X)
    scale = 1 << X.session.codec.frac_bits
    p = model.params
    z1 = trunc(matmul(X, p["w1"].T) + p["b1"] * scale)
    hidden = relu(z1)
    logits = matmul(hidden, p["w2"].T) + p["b2"] * scale
    return argmax(logits)


def infer(model: SharedModel, X: Shared) -> Shared:
    if model.architecture == LOGISTIC_REGRESSION:
        return infer_lr(model, X)
    return infer_mlp(model, X)
