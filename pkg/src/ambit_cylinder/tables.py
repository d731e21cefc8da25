"""RFC-4180 CSV emission and parsing with round-trip exact numbers."""
from __future__ import annotations

import csv
import math
import os
from typing import Iterable, Sequence

import numpy as np

__all__ = ["ParseError", "fmt", "write_csv", "read_csv", "read_numeric_csv"]


class ParseError(ValueError):
    pass


def fmt(x) -> str:
    """17 significant digits, which round-trips every double; ``None`` becomes empty."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])
    return os.fspath(path)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and string rows; ragged rows raise :class:`ParseError` with the line number."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = []
        for row in rd:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: line {rd.line_num}: expected {len(header)} fields, got {len(row)}"
                )
            rows.append(row)
    return header, rows


def _num(s: str, path, line: int) -> float:
    if s == "":
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise ParseError(f"{path}: line {line}: not a number: {s!r}") from None


def read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    header, rows = read_csv(path)
    data = np.array([[_num(v, path, i + 2) for v in row] for i, row in enumerate(rows)], dtype=float)
    return header, data.reshape(len(rows), len(header))
