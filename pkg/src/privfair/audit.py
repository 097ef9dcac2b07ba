"""Group fairness metrics computed on secret-shared labels, predictions and
sensitive attributes. Nothing is opened on the servers: every count, rate
and zero-denominator flag stays shared until released to the investigator.

Group axis convention: column 0 is A=0 (unprotected), column 1 is A=1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ShapeError
from .inference import SharedModel, infer
from .mpc.primitives import div, eq_public, eqz, mul, trunc
from .mpc.shared import Shared

METRICS = ("dp", "eop", "eod", "gacc")
MAX_INSTANCES = 1 << 20


def label_bits(n_classes: int) -> int:
    return max(1, (n_classes - 1).bit_length())


def count_bits(n: int) -> int:
    return max(1, n.bit_length())


@dataclass
class SharedDataset:
    X: Shared
    Y: Shared
    A: Shared
    n_classes: int

    def __post_init__(self):
        n = self.X.shape[0]
        if self.Y.shape != (n,) or self.A.shape != (n,):
            raise ShapeError(f"X has {n} rows but Y is {self.Y.shape} and A is {self.A.shape}")
        if not 1 <= n <= MAX_INSTANCES:
            raise ShapeError(f"audit size must be in [1, 2^20], got {n}")

    @property
    def n(self) -> int:
        return self.X.shape[0]


@dataclass
class ConfusionCounts:
    """Shared per-class, per-group counts; arrays have shape (len(classes), 2)."""

    classes: list[int]
    tp: Shared
    fn: Shared
    fp: Shared | None = None
    tn: Shared | None = None


@dataclass
class MetricShares:
    """Shared outputs of one metric protocol, in release order."""

    kind: str
    values: dict[str, Shared] = field(default_factory=dict)
    flags: dict[str, Shared] = field(default_factory=dict)
    counts: dict[str, Shared] = field(default_factory=dict)


def _stack_groups(g0: Shared, g1: Shared) -> Shared:
    return Shared.stack([g0, g1])


def _class_counts(y, y_pred, a, c, bits, with_negatives=True):
    """Counts for one class. Products per instance: tp, ta, pa, tpa
    (pa is skipped when only TP and FN are wanted)."""
    s = y.session
    n = y.shape[0]
    onehot = eq_public(Shared.concat([y, y_pred]), c, bits)
    grnd, pred = onehot[:n], onehot[n:]
    with s.labelled("confusion"):
        if with_negatives:
            first = mul(Shared.concat([grnd, grnd, pred]), Shared.concat([pred, a, a]))
            tp, ta, pa = first[:n], first[n:2 * n], first[2 * n:]
        else:
            first = mul(Shared.concat([grnd, grnd]), Shared.concat([pred, a]))
            tp, ta = first[:n], first[n:]
        tpa = mul(tp, a)
    TP1 = tpa.sum()
    FN1 = (ta - tpa).sum()
    TP0 = (tp - tpa).sum()
    FN0 = (grnd - ta - tp + tpa).sum()
    out = {"tp": _stack_groups(TP0, TP1), "fn": _stack_groups(FN0, FN1)}
    if with_negatives:
        FP1 = (pa - tpa).sum()
        TN1 = (a - ta - pa + tpa).sum()
        FP0 = (pred - pa - tp + tpa).sum()
        TN0 = (-grnd - pred - a + tp + ta + pa - tpa).sum().add_public(n)
        out["fp"] = _stack_groups(FP0, FP1)
        out["tn"] = _stack_groups(TN0, TN1)
    return out


def _check_lengths(y, y_pred, a):
    if not (y.shape == y_pred.shape == a.shape and len(y.shape) == 1):
        raise ShapeError(f"length mismatch: Y {y.shape}, Y_pred {y_pred.shape}, A {a.shape}")


def confusion_counts(y: Shared, y_pred: Shared, a: Shared, n_classes: int, classes=None) -> ConfusionCounts:
    """One-vs-rest TP/FN/FP/TN per class and group."""
    _check_lengths(y, y_pred, a)
    classes = list(range(n_classes)) if classes is None else list(classes)
    bits = label_bits(n_classes)
    per = [_class_counts(y, y_pred, a, c, bits) for c in classes]
    return ConfusionCounts(classes, *(Shared.stack([p[k] for p in per]) for k in ("tp", "fn", "fp", "tn")))


def _ratios(num: Shared, den: Shared, n: int):
    bits = count_bits(n)
    return div(num, den, bits), eqz(den, bits)


def _group_sizes(a: Shared, n: int) -> Shared:
    count1 = a.sum()
    count0 = (-count1).add_public(n)
    return _stack_groups(count0, count1)


def eod(model: SharedModel | None, data: SharedDataset, y_pred: Shared | None = None) -> MetricShares:
    """Per-class TPR and FPR for both groups, with zero-denominator flags.

    Binary tasks evaluate class 1 only.
    """
    if y_pred is None:
        y_pred = infer(model, data.X)
    _check_lengths(data.Y, y_pred, data.A)
    n, C = data.n, data.n_classes
    classes = [1] if C == 2 else list(range(C))
    bits = label_bits(C)
    rows = {k: [] for k in ("tpr", "fpr", "tpr_undefined", "fpr_undefined", "tp", "fn", "fp", "tn")}
    for c in classes:
        cnt = _class_counts(data.Y, y_pred, data.A, c, bits)
        num = Shared.concat([cnt["tp"], cnt["fp"]])
        den = Shared.concat([cnt["tp"] + cnt["fn"], cnt["fp"] + cnt["tn"]])
        rate, flag = _ratios(num, den, n)
        rows["tpr"].append(rate[:2])
        rows["fpr"].append(rate[2:])
        rows["tpr_undefined"].append(flag[:2])
        rows["fpr_undefined"].append(flag[2:])
        for k in ("tp", "fn", "fp", "tn"):
            rows[k].append(cnt[k])
    st = {k: Shared.stack(v) for k, v in rows.items()}
    return MetricShares(
        "eod",
        values={"tpr": st["tpr"], "fpr": st["fpr"]},
        flags={"tpr": st["tpr_undefined"], "fpr": st["fpr_undefined"]},
        counts={k: st[k] for k in ("tp", "fn", "fp", "tn")},
    )


def eop(model: SharedModel | None, data: SharedDataset, y_pred: Shared | None = None) -> MetricShares:
    """TPR of class 1 per group; the FP/TN branch is never executed."""
    if y_pred is None:
        y_pred = infer(model, data.X)
    _check_lengths(data.Y, y_pred, data.A)
    if data.n_classes != 2:
        raise ShapeError("equal opportunity is defined for binary tasks")
    cnt = _class_counts(data.Y, y_pred, data.A, 1, 1, with_negatives=False)
    rate, flag = _ratios(cnt["tp"], cnt["tp"] + cnt["fn"], data.n)
    return MetricShares("eop", {"tpr": rate}, {"tpr": flag}, {"tp": cnt["tp"], "fn": cnt["fn"]})


def dp(model: SharedModel | None, data: SharedDataset, y_pred: Shared | None = None) -> MetricShares:
    """Positive-prediction rate per group: (TP + FP) / group size."""
    if y_pred is None:
        y_pred = infer(model, data.X)
    _check_lengths(data.Y, y_pred, data.A)
    if data.n_classes != 2:
        raise ShapeError("demographic parity is defined for binary tasks")
    cnt = _class_counts(data.Y, y_pred, data.A, 1, 1)
    pos = cnt["tp"] + cnt["fp"]
    sizes = _group_sizes(data.A, data.n)
    rate, flag = _ratios(pos, sizes, data.n)
    counts = {k: cnt[k] for k in ("tp", "fn", "fp", "tn")}
    counts["pos"] = pos
    counts["size"] = sizes
    return MetricShares("dp", {"rate": rate}, {"rate": flag}, counts)


def gacc(model: SharedModel | None, data: SharedDataset, y_pred: Shared | None = None) -> MetricShares:
    """Accuracy per group and overall."""
    if y_pred is None:
        y_pred = infer(model, data.X)
    _check_lengths(data.Y, y_pred, data.A)
    s, n = data.Y.session, data.n
    sizes = _group_sizes(data.A, n)
    iscorr = eqz(data.Y - y_pred, label_bits(data.n_classes))
    with s.labelled("gacc"):
        iscorr1 = mul(iscorr, data.A)
    correct1 = iscorr1.sum()
    correct0 = (iscorr - iscorr1).sum()
    correct = _stack_groups(correct0, correct1)
    rate, flag = _ratios(correct, sizes, n)
    # 1/N at doubled precision so the rounding of the constant stays below one LSB.
    f = s.codec.frac_bits
    inv_n = ((1 << (2 * f)) + n // 2) // n
    overall = trunc((correct0 + correct1) * inv_n).reshape(1)
    return MetricShares(
        "gacc",
        {"acc": rate, "overall": overall},
        {"acc": flag},
        {"correct": correct, "size": sizes},
    )


PROTOCOLS = {"dp": dp, "eop": eop, "eod": eod, "gacc": gacc}


def run_metrics(model: SharedModel, data: SharedDataset, metrics) -> list[MetricShares]:
    """Label the audit data once, then run the selected protocols in order."""
    for m in metrics:
        if m not in PROTOCOLS:
            raise ValueError(f"unknown metric {m!r}")
    s = data.Y.session
    with s.labelled("infer"):
        y_pred = infer(model, data.X)
    out = []
    for m in metrics:
        with s.labelled(m):
            out.append(PROTOCOLS[m](model, data, y_pred))
    return out
