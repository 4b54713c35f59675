"""CSV/JSON readers and writers with fixed formatting for reproducible files."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DataError, MissingColumn
from .ingest import YearlyCounts
from .relatedness import ProximityMatrix
from .specialization import CountMatrix, SpecializationMatrix

FLOAT_FORMAT = "%.12g"


def write_csv(frame: pd.DataFrame, path, index=False):
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_matrix(matrix, path, index_name="country"):
    frame = matrix.to_frame() if hasattr(matrix, "to_frame") else matrix
    frame = frame.copy()
    frame.index.name = index_name
    write_csv(frame, path, index=True)


def read_matrix_frame(path):
    frame = pd.read_csv(path, index_col=0, keep_default_na=False)
    frame.index = frame.index.astype(str)
    frame.columns = [str(c) for c in frame.columns]
    return frame


def read_specialization(path, period=None) -> SpecializationMatrix:
    frame = read_matrix_frame(path)
    return SpecializationMatrix(tuple(frame.index), tuple(frame.columns), frame.to_numpy(), period)


def read_counts_matrix(path, period=None) -> CountMatrix:
    frame = read_matrix_frame(path)
    return CountMatrix.from_array(frame.to_numpy(dtype=float), frame.index, frame.columns, period)


def write_yearly(y: YearlyCounts, path):
    write_csv(y.frame, path)


def read_yearly(path) -> YearlyCounts:
    frame = pd.read_csv(path, keep_default_na=False, dtype={"country": str, "language": str})
    for col in ("year", "country", "language", "developers"):
        if col not in frame.columns:
            raise MissingColumn(col, path)
    frame = frame.astype({"year": "int64", "developers": "float64"})
    if frame.duplicated(["year", "country", "language"]).any():
        raise DataError(f"duplicate (year, country, language) rows in {path}")
    return YearlyCounts(frame[["year", "country", "language", "developers"]])


def read_proximity(path) -> ProximityMatrix:
    """Long ``l1,l2,phi`` file back to a symmetric matrix with unit diagonal."""
    frame = pd.read_csv(path, keep_default_na=False, dtype={"l1": str, "l2": str})
    for col in ("l1", "l2", "phi"):
        if col not in frame.columns:
            raise MissingColumn(col, path)
    labels = sorted(set(frame["l1"]) | set(frame["l2"]))
    pos = {a: i for i, a in enumerate(labels)}
    values = np.eye(len(labels))
    for a, b, phi in zip(frame["l1"], frame["l2"], frame["phi"].astype(float)):
        values[pos[a], pos[b]] = values[pos[b], pos[a]] = phi
    return ProximityMatrix(tuple(labels), values)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
