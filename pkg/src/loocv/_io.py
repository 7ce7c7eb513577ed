"""CSV ingestion and JSON-lines / CSV emission with 17 significant digits."""

from __future__ import annotations

import csv
import json
import math

import numpy as np


class InputError(Exception):
    """Unusable input file; ``code`` is the process exit status to report."""

    code = 2


class UnreadableError(InputError):
    code = 2


class RaggedError(InputError):
    code = 5


class NonNumericError(InputError):
    code = 6


def read_matrix(path, header: bool = False) -> np.ndarray:
    """Read a headerless numeric CSV into a 2-D float array.

    Blank lines are skipped. Rows of unequal length raise :class:`RaggedError`
    and cells that do not parse as floats raise :class:`NonNumericError`,
    both naming the offending line.
    """
    try:
        with open(path, newline="") as fh:
            lines = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableError(f"cannot read {path}: {exc}") from exc
    start = 1 if header else 0
    rows = []
    width = None
    for lineno, row in enumerate(lines[start:], start=start + 1):
        if not row or all(c.strip() == "" for c in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise RaggedError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise NonNumericError(f"{path}:{lineno}:{col}: not a number: {cell.strip()!r}") from None
        rows.append(vals)
    if not rows:
        raise UnreadableError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def read_vector(path, header: bool = False) -> np.ndarray:
    m = read_matrix(path, header)
    if m.shape[1] != 1:
        raise UnreadableError(f"{path}: expected a single column, found {m.shape[1]}")
    return m[:, 0]


def fmt(v: float) -> str:
    return "%.17g" % v


def write_matrix(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", newline="") as fh:
        for row in a:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _json(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return fmt(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def jsonl_line(record: dict) -> str:
    """One JSON object per line; floats with 17 significant digits, non-finite as null."""
    return _json(record) + "\n"


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(float(v)) if math.isfinite(v) else ""
    return str(v)


class RecordWriter:
    """Writes a provenance header and then records as JSON lines or CSV rows.

    JSON-lines output starts with ``{"provenance": ...}``; CSV output starts
    with ``# provenance`` comment lines followed by the column header taken
    from the first record.
    """

    def __init__(self, fh, fmt_name: str, provenance: dict):
        self.fh = fh
        self.fmt = fmt_name
        self.columns = None
        if fmt_name == "jsonl":
            fh.write(jsonl_line({"provenance": provenance}))
        else:
            fh.write("# provenance " + _json(provenance) + "\n")

    def write(self, record: dict) -> None:
        if self.fmt == "jsonl":
            self.fh.write(jsonl_line(record))
            return
        if self.columns is None:
            self.columns = list(record)
            self.fh.write(",".join(self.columns) + "\n")
        extra = [k for k in record if k not in self.columns]
        if extra:
            raise ValueError(f"record has columns {extra} not in the CSV header")
        self.fh.write(",".join(_csv_cell(record.get(k)) for k in self.columns) + "\n")


def read_provenance(path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# provenance "):
        return json.loads(first[len("# provenance "):])
    return json.loads(first)["provenance"]
