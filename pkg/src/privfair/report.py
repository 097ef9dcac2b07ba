"""Release layout of audit outputs, the investigator's decoded report and
its terminal rendering.

Servers flatten their shared outputs in ``output_layout`` order; the
investigator reconstructs one vector and cuts it back up the same way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audit import METRICS, MetricShares
from .mpc.shared import Shared
from .ring import FixedPointCodec, to_signed

TITLES = {
    "dp": "Demographic parity",
    "eop": "Equal opportunity",
    "eod": "Equalized odds",
    "gacc": "Sub-group accuracy",
}
DIGITS = 3

_VALUES = {"dp": ["rate"], "eop": ["tpr"], "eod": ["tpr", "fpr"], "gacc": ["acc", "overall"]}
_FLAGS = {"dp": ["rate"], "eop": ["tpr"], "eod": ["tpr", "fpr"], "gacc": ["acc"]}
_COUNTS = {
    "dp": ["tp", "fn", "fp", "tn", "pos", "size"],
    "eop": ["tp", "fn"],
    "eod": ["tp", "fn", "fp", "tn"],
    "gacc": ["correct", "size"],
}


def eod_classes(n_classes: int) -> list[int]:
    return [1] if n_classes == 2 else list(range(n_classes))


def output_layout(metrics, n_classes: int, include_counts: bool = True) -> list[tuple[str, str, str, tuple]]:
    """Ordered (metric, section, name, shape) entries of the released vector."""
    out = []
    for m in metrics:
        if m not in METRICS:
            raise ValueError(f"unknown metric {m!r}")
        grid = (len(eod_classes(n_classes)), 2) if m == "eod" else (2,)
        for name in _VALUES[m]:
            out.append((m, "value", name, (1,) if name == "overall" else grid))
        for name in _FLAGS[m]:
            out.append((m, "flag", name, grid))
        if include_counts:
            for name in _COUNTS[m]:
                out.append((m, "count", name, grid))
    return out


def flatten_outputs(results: list[MetricShares], n_classes: int, include_counts: bool = True) -> Shared:
    by_kind = {r.kind: r for r in results}
    pieces = []
    for m, section, name, shape in output_layout([r.kind for r in results], n_classes, include_counts):
        table = {"value": by_kind[m].values, "flag": by_kind[m].flags, "count": by_kind[m].counts}[section]
        if table[name].shape != shape:
            raise ValueError(f"{m}.{name} has shape {table[name].shape}, layout says {shape}")
        pieces.append(table[name].ravel())
    return Shared.concat(pieces)


@dataclass
class FairnessReport:
    """Reconstructed audit outputs. Group axis is last: column 0 is A=0."""

    metrics: list[str]
    values: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    undefined: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    counts: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    classes: dict[str, list[int]] = field(default_factory=dict)

    @classmethod
    def from_release(cls, opened: np.ndarray, metrics, n_classes: int, codec: FixedPointCodec, include_counts: bool = True):
        layout = output_layout(metrics, n_classes, include_counts)
        total = sum(math.prod(shape) for *_, shape in layout)
        if opened.size != total:
            raise ValueError(f"released vector has {opened.size} entries, expected {total}")
        rep = cls(list(metrics))
        at = 0
        for m, section, name, shape in layout:
            chunk = opened[at:at + math.prod(shape)].reshape(shape)
            at += chunk.size
            if section == "value":
                rep.values.setdefault(m, {})[name] = codec.decode_array(chunk)
            elif section == "flag":
                rep.undefined.setdefault(m, {})[name] = to_signed(chunk) != 0
            else:
                rep.counts.setdefault(m, {})[name] = to_signed(chunk)
        if "eod" in rep.metrics:
            rep.classes["eod"] = eod_classes(n_classes)
        return rep

    def flags(self, metric: str, name: str) -> np.ndarray:
        flags = self.undefined.get(metric, {}).get(name)
        return np.zeros(self.values[metric][name].shape, dtype=bool) if flags is None else flags

    def as_float(self, metric: str, name: str) -> np.ndarray:
        return np.where(self.flags(metric, name), np.nan, self.values[metric][name])


def _fmt(v: float, digits: int) -> str:
    return "undefined" if math.isnan(v) else f"{v:.{digits}f}"


def render(report, groups=("protected", "unprotected"), digits: int = DIGITS) -> list[str]:
    """One line per metric and group; ``groups`` names A=1 then A=0.

    Works for both ``FairnessReport`` and the plaintext ``PlainReport``.
    """
    g1, g0 = groups
    order = [(1, g1), (0, g0)]
    lines = []
    for m in report.metrics:
        title = TITLES[m]
        if m == "eod":
            tpr, fpr = report.as_float(m, "tpr"), report.as_float(m, "fpr")
            for row, c in enumerate(report.classes[m]):
                for col, g in order:
                    lines.append(f"{title} TPR class {c} - {g}: {_fmt(tpr[row, col], digits)}")
                for col, g in order:
                    lines.append(f"{title} FPR class {c} - {g}: {_fmt(fpr[row, col], digits)}")
            continue
        vals = report.as_float(m, _VALUES[m][0])
        for col, g in order:
            lines.append(f"{title} - {g}: {_fmt(vals[col], digits)}")
        if m == "gacc":
            lines.append(f"Overall accuracy: {_fmt(report.as_float(m, 'overall')[0], digits)}")
    return lines


def report_to_dict(report) -> dict:
    """JSON-ready form: NaN-free values (null where undefined) and counts."""
    out = {"metrics": list(report.metrics), "results": {}}
    for m in report.metrics:
        entry = {}
        for name in _VALUES[m]:
            vals = report.as_float(m, name)
            entry[name] = np.where(np.isnan(vals), None, vals).tolist()
        counts = report.counts.get(m)
        if counts:
            entry["counts"] = {k: np.asarray(v, dtype=np.int64).tolist() for k, v in counts.items()}
        if m == "eod":
            entry["classes"] = list(report.classes[m])
        out["results"][m] = entry
    return out
