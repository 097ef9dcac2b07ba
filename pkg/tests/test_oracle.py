from fractions import Fraction

import numpy as np
import pytest
from sklearn.metrics import confusion_matrix

from privfair.errors import ShapeError
from privfair.inference import LOGISTIC_REGRESSION, MLP1, ModelParams
from privfair.oracle import logit_margin, plain_infer, plain_metrics


def test_plain_infer_constant_models():
    X = np.random.default_rng(0).normal(size=(6, 3))
    lr = ModelParams(LOGISTIC_REGRESSION, 3, {"w": np.zeros(3), "b": np.array([1.0])})
    assert plain_infer(lr, X).tolist() == [1] * 6
    zero = ModelParams(MLP1, 3, {"w1": np.zeros((2, 3)), "b1": np.zeros(2), "w2": np.zeros((4, 2)), "b2": np.zeros(4)}, 2, 4)
    assert plain_infer(zero, X).tolist() == [0] * 6
    assert logit_margin(zero, X).tolist() == [0.0] * 6
    with pytest.raises(ShapeError):
        plain_infer(lr, X[:, :2])


def test_perfect_labels():
    rng = np.random.default_rng(1)
    y, a = rng.integers(0, 3, 50), rng.integers(0, 2, 50)
    rep = plain_metrics(y, y, a, 3, ["eod", "gacc"])
    assert np.all(rep.as_float("eod", "tpr") == 1.0) and np.all(rep.as_float("eod", "fpr") == 0.0)
    assert np.all(rep.as_float("gacc", "acc") == 1.0) and rep.values["gacc"]["overall"][0] == 1


def test_eight_instance_table():
    y = [1, 1, 0, 0] * 2
    yp = [1, 0, 1, 0] * 2
    a = [1] * 4 + [0] * 4
    rep = plain_metrics(yp, y, a, 2, ["eod"])
    assert rep.values["eod"]["tpr"].tolist() == [[Fraction(1, 2)] * 2]
    assert rep.values["eod"]["fpr"].tolist() == [[Fraction(1, 2)] * 2]


def test_empty_protected_group_is_undefined():
    rep = plain_metrics([1, 0, 1], [1, 1, 0], [0, 0, 0], 2, ["dp", "gacc"])
    assert rep.flags("dp", "rate").tolist() == [False, True]
    assert np.isnan(rep.as_float("dp", "rate")[1])
    assert rep.values["dp"]["rate"][0] == Fraction(2, 3)


def test_counts_agree_with_sklearn():
    rng = np.random.default_rng(2)
    C, n = 5, 300
    y, yp, a = rng.integers(0, C, n), rng.integers(0, C, n), rng.integers(0, 2, n)
    rep = plain_metrics(yp, y, a, C, ["eod", "gacc"])
    for g in (0, 1):
        cm = confusion_matrix(y[a == g], yp[a == g], labels=list(range(C)))
        tp = np.diag(cm)
        fn = cm.sum(axis=1) - tp
        fp = cm.sum(axis=0) - tp
        tn = cm.sum() - tp - fn - fp
        for name, ref in (("tp", tp), ("fn", fn), ("fp", fp), ("tn", tn)):
            assert rep.counts["eod"][name][:, g].tolist() == ref.tolist()
        assert rep.counts["gacc"]["correct"][g] == tp.sum()


def test_rejects_bad_inputs():
    with pytest.raises(ShapeError):
        plain_metrics([0, 1], [0, 1, 1], [0, 1, 1], 2, ["dp"])
    with pytest.raises(ShapeError):
        plain_metrics([0, 1], [0, 2], [0, 1], 2, ["dp"])
    with pytest.raises(ShapeError):
        plain_metrics([0, 2], [0, 2], [0, 1], 3, ["eop"])
    with pytest.raises(ValueError):
        plain_metrics([0], [0], [0], 2, ["calibration"])
