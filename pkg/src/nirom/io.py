"""Plain-text artifact formats shared across the pipeline.

Matrices (snapshots, bases, model payloads) are stored as one header line
"rows cols" followed by one line per column of %.17g doubles, so files
round-trip float64 exactly. Small key-value metadata uses "key = value"
lines. Tables go to CSV with an explicit header row.
"""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np


def format_double(v: float) -> str:
    return format(float(v), ".17g")


def write_matrix(path, arr) -> None:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("matrix format holds 2d arrays only")
    with open(path, "w") as fh:
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for col in arr.T:
            fh.write(" ".join(format_double(v) for v in col) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad matrix header {header!r}")
        rows, cols = int(header[0]), int(header[1])
        flat = np.array(fh.read().split(), dtype=float)
    if flat.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, got {flat.size}")
    return flat.reshape(cols, rows).T


def write_keyvalues(path, mapping: dict) -> None:
    with open(path, "w") as fh:
        for key, val in mapping.items():
            fh.write(f"{key} = {val}\n")


def read_keyvalues(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_csv(path):
    """Return (header, rows-as-strings)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)
