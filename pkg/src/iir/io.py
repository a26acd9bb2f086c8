"""Dataset ingestion and result serialization."""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from dataclasses import dataclass
from typing import Any

import numpy as np

from .model import ContractViolation, DataSet

TOOL_VERSION = "0.1.0"


class ParseError(ValueError):
    """Malformed input file."""


def load_csv(
    path: str,
    target_column: int | str = -1,
    has_header: bool = False,
    task: str = "regression",
) -> DataSet:
    """Load a numeric CSV into a DataSet.

    Features are all non-target columns in file order; the target column may
    be given by index (negative counts from the end) or by header name.
    NaN/Inf and non-numeric cells are rejected with the offending row/column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = None
    if has_header:
        header = rows[0]
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: no data rows after header")
    ncol = len(rows[0])
    if isinstance(target_column, str):
        if header is None or target_column not in header:
            raise ParseError(f"{path}: no column named {target_column!r}")
        target = header.index(target_column)
    else:
        target = target_column % ncol

    data = np.empty((len(rows), ncol))
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise ParseError(f"{path}: row {i + 1} has {len(row)} cells, expected {ncol}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell {cell!r} at row {i + 1}, column {j + 1}"
                ) from None
            if not np.isfinite(v):
                raise ParseError(f"{path}: non-finite value at row {i + 1}, column {j + 1}")
            data[i, j] = v
    y = data[:, target]
    x = np.delete(data, target, axis=1)
    if x.shape[1] == 0:
        raise ParseError(f"{path}: no feature columns left after removing the target")
    return DataSet(x, y, task=task)


def load_libsvm(path: str, task: str = "regression") -> DataSet:
    """Load a libsvm/svmlight file: lines "label idx:val ...", 1-based
    ascending indices. Missing indices are dense zeros; d = max index seen."""
    labels: list[float] = []
    entries: list[list[tuple[int, float]]] = []
    d = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            feats: list[tuple[int, float]] = []
            prev = 0
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: malformed pair {tok!r}") from None
                if idx < 1:
                    raise ParseError(f"{path}:{lineno}: index {idx} must be >= 1")
                if idx <= prev:
                    raise ParseError(f"{path}:{lineno}: indices must be ascending")
                prev = idx
                feats.append((idx, val))
            entries.append(feats)
            d = max(d, prev)
    if not labels:
        raise ParseError(f"{path}: empty file")
    if d == 0:
        raise ParseError(f"{path}: no features found")
    x = np.zeros((len(labels), d))
    for i, feats in enumerate(entries):
        for idx, val in feats:
            x[i, idx - 1] = val
    return DataSet(x, np.asarray(labels), task=task)


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


@dataclass
class ResultEnvelope:
    """Common wrapper for structured reports."""

    command: str
    config: dict
    seed: int
    metrics: dict
    timing_seconds: float = 0.0
    version: str = TOOL_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "command": self.command,
            "config": _to_jsonable(self.config),
            "seed": self.seed,
            "metrics": _to_jsonable(self.metrics),
            "timing_seconds": self.timing_seconds,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ResultEnvelope":
        return cls(
            command=payload["command"],
            config=payload["config"],
            seed=payload["seed"],
            metrics=payload["metrics"],
            timing_seconds=payload["timing_seconds"],
            version=payload["version"],
        )


def envelope_json(env: ResultEnvelope) -> str:
    return json.dumps(env.to_dict(), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


CURVE_HEADER = ("epoch", "train", "validation", "test")


def curve_csv(rows) -> str:
    """Serialize error-curve rows with the canonical header."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for epoch, train, val, test in rows:
        writer.writerow([epoch, repr(float(train)), repr(float(val)), repr(float(test))])
    return buf.getvalue()


def read_curve_csv(text: str) -> list[tuple[int, float, float, float]]:
    reader = csv.reader(_io.StringIO(text))
    header = next(reader)
    if tuple(header) != CURVE_HEADER:
        raise ParseError(f"unexpected curve header {header}")
    return [(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in reader if r]


def dataset_csv(data: DataSet) -> str:
    """Serialize a DataSet with the target as the last column."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for xi, yi in zip(data.x, data.y):
        writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
    return buf.getvalue()
