"""Comma-separated tables with a header row.

Floats are written with 17 significant digits, enough to read back the
same double, so a write/read cycle is lossless and repeated runs produce
identical bytes.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import InputError


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def table_text(header, columns) -> str:
    header = [str(h) for h in header]
    cols = [np.atleast_1d(np.asarray(c)) for c in columns]
    if len(cols) != len(header):
        raise InputError("one column per header entry")
    n = cols[0].shape[0] if cols else 0
    if any(c.shape != (n,) for c in cols):
        raise InputError("columns must be one-dimensional and of equal length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(n):
        w.writerow([format_value(c[i]) for c in cols])
    return buf.getvalue()


def write_table(path, header, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table_text(header, columns), encoding="utf-8")
    return path


def read_table(path):
    """(header, {name: float array}) from a table written by :func:`write_table`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body], dtype=float).reshape(
        len(body), len(header))
    return header, {h: data[:, k] for k, h in enumerate(header)}
