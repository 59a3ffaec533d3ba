"""File formats: observation triplets, dense matrices with missing cells,
flat key-value config files.

Observations are CSV with header ``j,t,y`` and 0-based indices. Dense matrices
are headerless CSV by default; empty cells and ``NaN`` mark missing entries.
Floats are written with 17 significant digits so that a round trip is exact.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .core import ObservationSet


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def save_observations(obs: ObservationSet, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("j,t,y\n")
        for j, t, y in zip(obs.rows.tolist(), obs.cols.tolist(), obs.values.tolist()):
            fh.write(f"{j},{t},{format_float(y)}\n")


def load_observations(path, rows: int | None = None, cols: int | None = None) -> ObservationSet:
    """Read a ``j,t,y`` CSV. ``d`` and ``T`` default to the largest index + 1."""
    js, ts, ys = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["j", "t", "y"]:
            raise ValueError(f"{path}: line 1: expected header 'j,t,y'")
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 3 fields, got {len(record)}")
            try:
                j, t, y = int(record[0]), int(record[1]), float(record[2])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {record!r}") from None
            if j < 0 or t < 0:
                raise ValueError(f"{path}: line {lineno}: negative index")
            if not math.isfinite(y):
                raise ValueError(f"{path}: line {lineno}: non-finite value")
            js.append(j)
            ts.append(t)
            ys.append(y)
    if not js:
        raise ValueError(f"{path}: empty observation set")
    d = max(js) + 1 if rows is None else rows
    T = max(ts) + 1 if cols is None else cols
    if max(js) >= d or max(ts) >= T:
        raise ValueError(f"{path}: index out of range for a {d} x {T} matrix")
    return ObservationSet(np.array(js), np.array(ts), np.array(ys), d, T)


def _parse_cell(cell: str) -> float:
    cell = cell.strip()
    if cell == "" or cell.lower() == "nan":
        return np.nan
    return float(cell)


def load_matrix_with_missing(path, header: bool = False, drop_cols=()):
    """Read a dense CSV; returns the matrix (NaN where missing) and its observed entries.

    ``drop_cols`` removes 0-based columns before indexing, e.g. weekend hours.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        table = []
        width = None
        for lineno, record in enumerate(reader, start=2 if header else 1):
            if not record:
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise ValueError(f"{path}: line {lineno}: ragged row ({len(record)} cells, expected {width})")
            try:
                table.append([_parse_cell(c) for c in record])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed cell") from None
    if not table:
        raise ValueError(f"{path}: no data")
    M = np.array(table, dtype=np.float64)
    if drop_cols:
        keep = np.setdiff1d(np.arange(M.shape[1]), np.asarray(list(drop_cols), dtype=int))
        M = M[:, keep]
    j, t = np.nonzero(~np.isnan(M))
    obs = ObservationSet(j, t, M[j, t], M.shape[0], M.shape[1])
    return M, obs


def save_matrix(M, path):
    M = np.asarray(M, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join("" if np.isnan(x) else format_float(x) for x in row))
            fh.write("\n")


def load_matrix(path) -> np.ndarray:
    M, _ = load_matrix_with_missing(path)
    return M


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys use flag names."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out
