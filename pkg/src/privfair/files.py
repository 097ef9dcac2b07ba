"""Dataset (CSV) and model (JSON) files read and written by the clients."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ShapeError
from .inference import ARCHITECTURES, ModelParams

MODEL_FORMAT = "privfair-model"
MODEL_VERSION = 1


@dataclass
class AuditDataset:
    X: np.ndarray  # (N, d) float
    Y: np.ndarray  # (N,) int
    A: np.ndarray  # (N,) int in {0, 1}
    n_classes: int = 2

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.int64)
        self.A = np.asarray(self.A, dtype=np.int64)
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.Y.shape != (n,) or self.A.shape != (n,):
            raise ShapeError(f"inconsistent dataset shapes X{self.X.shape} Y{self.Y.shape} A{self.A.shape}")
        if np.any((self.Y < 0) | (self.Y >= self.n_classes)):
            raise ShapeError(f"labels must lie in [0, {self.n_classes})")
        if np.any((self.A != 0) & (self.A != 1)):
            raise ShapeError("sensitive attribute must be 0 or 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def _open(path, mode="r"):
    try:
        return open(path, mode, newline="" if "b" not in mode else None)
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def load_dataset(path, n_classes: int = 2) -> AuditDataset:
    """Read ``f1..fd,y,a`` CSV. Every bad row is reported with its line number."""
    with _open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        header = [h.strip() for h in header]
        d = len(header) - 2
        expected = [f"f{i}" for i in range(1, d + 1)] + ["y", "a"]
        if d < 1 or header != expected:
            raise ParseError(f"{path}:1: header must be f1..fd,y,a")
        X, Y, A = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d + 2:
                raise ParseError(f"{path}:{line}: expected {d + 2} fields, got {len(row)}")
            try:
                feats = [float(v) for v in row[:d]]
                y, a = int(row[d]), int(row[d + 1])
            except ValueError as exc:
                raise ParseError(f"{path}:{line}: {exc}") from None
            if not all(math.isfinite(v) for v in feats):
                raise ParseError(f"{path}:{line}: non-finite feature value")
            if not 0 <= y < n_classes:
                raise ParseError(f"{path}:{line}: label {y} outside [0, {n_classes})")
            if a not in (0, 1):
                raise ParseError(f"{path}:{line}: sensitive attribute {a} is not 0 or 1")
            X.append(feats)
            Y.append(y)
            A.append(a)
    if not X:
        raise ParseError(f"{path}: no data rows")
    return AuditDataset(np.array(X), np.array(Y), np.array(A), n_classes)


def save_dataset(path, data: AuditDataset) -> None:
    with _open(path, "w") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i}" for i in range(1, data.n_features + 1)] + ["y", "a"])
        for x, y, a in zip(data.X, data.Y, data.A):
            w.writerow([repr(float(v)) for v in x] + [int(y), int(a)])


def load_model(path) -> ModelParams:
    with _open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ParseError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ParseError(f"{path}: unsupported model version {doc.get('version')!r}")
    arch = doc.get("architecture")
    if arch not in ARCHITECTURES:
        raise ParseError(f"{path}: unknown architecture {arch!r}")
    try:
        dims = doc["dims"]
        params = {k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()}
        return ModelParams(arch, int(dims["features"]), params, int(dims.get("hidden", 0)), int(dims.get("classes", 2)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def save_model(path, model: ModelParams) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "architecture": model.architecture,
        "dims": {"features": model.n_features, "hidden": model.hidden, "classes": model.n_classes},
        "params": {name: model.params[name].tolist() for name, _ in model.layout()},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
