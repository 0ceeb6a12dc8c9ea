"""CSV row output.  Floats are written with 17 significant digits so files round-trip exactly."""

from __future__ import annotations

import csv
import io
import math
import numbers
from pathlib import Path
from typing import Mapping, Sequence

__all__ = ["format_value", "parse_value", "write_csv", "read_csv", "render_csv"]


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        return format(float(v), ".17g")
    return str(v)


def parse_value(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        x = float(s)
    except ValueError:
        return s
    # keep "1e-05"-style strings as floats, but reject things like "infinity"
    return x if math.isfinite(x) or s in ("inf", "-inf", "nan") else s


def render_csv(rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    path.write_text(render_csv(rows, columns), encoding="utf-8")
    return path


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [dict(zip(header, map(parse_value, rec))) for rec in reader]
    return header, rows

