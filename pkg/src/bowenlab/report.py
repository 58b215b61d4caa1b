"""CSV emission. Floats carry 9 significant digits; lines end in LF."""

from __future__ import annotations

import csv
import io
import math
import sys
from pathlib import Path

from .errors import InputError


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.9g}"
    return str(v)


def format_csv(table) -> str:
    """Render a list of dict rows (shared keys, in order) as CSV text."""
    rows = list(table)
    if not rows:
        raise InputError("refusing to write an empty table")
    header = list(rows[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if list(row) != header:
            raise InputError("table rows have different columns")
        writer.writerow([_fmt(row[k]) for k in header])
    return buf.getvalue()


def write_csv(table, path=None) -> None:
    """Write ``table`` to ``path`` (stdout when None or '-')."""
    text = format_csv(table)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
