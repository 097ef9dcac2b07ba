"""Reference audit in the clear, with exact rational arithmetic throughout."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ShapeError
from .inference import LOGISTIC_REGRESSION, ModelParams


def _exact(values) -> np.ndarray:
    arr = np.asarray(values)
    return np.vectorize(lambda v: Fraction(float(v)) if not isinstance(v, Fraction) else v, otypes=[object])(arr)


def plain_scores(model: ModelParams, X) -> np.ndarray:
    """Exact LR scores (N,) or MLP logits (N, C) as Fractions."""
    X = _exact(X)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"dataset has shape {X.shape}, model expects {model.n_features} features")
    p = {k: _exact(v) for k, v in model.params.items()}
    if model.architecture == LOGISTIC_REGRESSION:
        return X.dot(p["w"]) + p["b"][0]
    hidden = X.dot(p["w1"].T) + p["b1"]
    hidden = np.where(hidden > 0, hidden, Fraction(0))
    return hidden.dot(p["w2"].T) + p["b2"]


def plain_infer(model: ModelParams, X) -> np.ndarray:
    scores = plain_scores(model, X)
    if model.architecture == LOGISTIC_REGRESSION:
        return np.array([1 if s >= 0 else 0 for s in scores], dtype=np.int64)
    # first maximal index wins ties
    return np.array([max(range(len(row)), key=lambda c: (row[c], -c)) for row in scores], dtype=np.int64)


def logit_margin(model: ModelParams, X) -> np.ndarray:
    """Distance from the decision boundary per instance, as floats.

    LR: |score|. MLP: gap between the two largest logits.
    """
    scores = plain_scores(model, X)
    if model.architecture == LOGISTIC_REGRESSION:
        return np.array([float(abs(s)) for s in scores])
    out = []
    for row in scores:
        top = sorted(row, reverse=True)
        out.append(float(top[0] - top[1]))
    return np.array(out)


def _ratio(num: int, den: int):
    return Fraction(num, den) if den else None


@dataclass
class PlainReport:
    """Exact counterpart of the reconstructed audit report.

    ``values[metric][name]`` is an object array of Fractions (None where the
    denominator is zero); group axis is last with column 0 for A=0.
    """

    metrics: list[str]
    values: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    counts: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    classes: dict[str, list[int]] = field(default_factory=dict)

    def flags(self, metric: str, name: str) -> np.ndarray:
        return np.vectorize(lambda v: v is None, otypes=[bool])(self.values[metric][name])

    def as_float(self, metric: str, name: str) -> np.ndarray:
        return np.vectorize(lambda v: float("nan") if v is None else float(v), otypes=[float])(self.values[metric][name])


def _confusion(labels, Y, A, c):
    out = {k: np.zeros(2, dtype=np.int64) for k in ("tp", "fn", "fp", "tn")}
    for yhat, y, a in zip(labels, Y, A):
        key = ("t" if (yhat == c) == (y == c) else "f") + ("p" if yhat == c else "n")
        out[key][a] += 1
    return out


def plain_metrics(labels, Y, A, n_classes: int, kinds) -> PlainReport:
    labels, Y, A = (np.asarray(v, dtype=np.int64) for v in (labels, Y, A))
    if not (labels.shape == Y.shape == A.shape and labels.ndim == 1):
        raise ShapeError("labels, Y and A must be equal-length vectors")
    if np.any((Y < 0) | (Y >= n_classes)) or np.any((A != 0) & (A != 1)):
        raise ShapeError("labels or sensitive attributes out of range")
    kinds = [kinds] if isinstance(kinds, str) else list(kinds)
    rep = PlainReport(kinds)
    sizes = np.array([np.sum(A == 0), np.sum(A == 1)], dtype=np.int64)
    for kind in kinds:
        if kind in ("dp", "eop") and n_classes != 2:
            raise ShapeError(f"{kind} is defined for binary tasks")
        if kind == "eod":
            classes = [1] if n_classes == 2 else list(range(n_classes))
            per = [_confusion(labels, Y, A, c) for c in classes]
            cnt = {k: np.stack([p[k] for p in per]) for k in ("tp", "fn", "fp", "tn")}
            tpr = np.array([[_ratio(t, t + f) for t, f in zip(*row)] for row in zip(cnt["tp"], cnt["fn"])], dtype=object)
            fpr = np.array([[_ratio(p, p + t) for p, t in zip(*row)] for row in zip(cnt["fp"], cnt["tn"])], dtype=object)
            rep.values[kind] = {"tpr": tpr, "fpr": fpr}
            rep.counts[kind] = cnt
            rep.classes[kind] = classes
        elif kind == "eop":
            cnt = _confusion(labels, Y, A, 1)
            rep.values[kind] = {"tpr": np.array([_ratio(cnt["tp"][g], cnt["tp"][g] + cnt["fn"][g]) for g in (0, 1)], dtype=object)}
            rep.counts[kind] = {"tp": cnt["tp"], "fn": cnt["fn"]}
        elif kind == "dp":
            cnt = _confusion(labels, Y, A, 1)
            pos = cnt["tp"] + cnt["fp"]
            rep.values[kind] = {"rate": np.array([_ratio(pos[g], sizes[g]) for g in (0, 1)], dtype=object)}
            rep.counts[kind] = {**cnt, "pos": pos, "size": sizes}
        elif kind == "gacc":
            ok = labels == Y
            correct = np.array([np.sum(ok & (A == 0)), np.sum(ok & (A == 1))], dtype=np.int64)
            rep.values[kind] = {
                "acc": np.array([_ratio(correct[g], sizes[g]) for g in (0, 1)], dtype=object),
                "overall": np.array([_ratio(int(correct.sum()), len(Y))], dtype=object),
            }
            rep.counts[kind] = {"correct": correct, "size": sizes}
        else:
            raise ValueError(f"unknown metric {kind!r}")
    return rep
