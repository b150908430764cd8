"""Grid-function text files, scan configurations and report serialization.

Grid-function format::

    # optional comment lines
    n N h
    v0 v1 v2 ...

``N**n`` whitespace-separated decimals in row-major order (last axis
fastest), written with 17 significant digits so a round trip is bit-exact.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .grid import Grid, GridFunction
from .scan import ScanConfig, ScanReport


class GridFileError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = ":".join(str(x) for x in (path, line) if x is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def dumps_grid_function(f: GridFunction) -> str:
    g = f.grid
    lines = [f"{g.n} {g.N} {format_float(g.h)}"]
    row = g.N
    vals = [format_float(v) for v in f.flat]
    lines += [" ".join(vals[i:i + row]) for i in range(0, len(vals), row)]
    return "\n".join(lines) + "\n"


def write_grid_function(f: GridFunction, path) -> None:
    Path(path).write_text(dumps_grid_function(f), encoding="utf-8")


def loads_grid_function(text: str, path=None) -> GridFunction:
    header = None
    values: list[float] = []
    first_value_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if header is None:
            if len(tokens) != 3:
                raise GridFileError(f"header must be 'n N h', got {line!r}", lineno, path)
            try:
                n, N, h = int(tokens[0]), int(tokens[1]), float(tokens[2])
                header = Grid(n, N, h)
            except ValueError as exc:
                raise GridFileError(f"malformed header {line!r}: {exc}", lineno, path) from None
            continue
        first_value_line = first_value_line or lineno
        for tok in tokens:
            try:
                v = float(tok)
            except ValueError:
                raise GridFileError(f"not a number: {tok!r}", lineno, path) from None
            if not math.isfinite(v):
                raise GridFileError(f"non-finite value {tok!r}", lineno, path)
            values.append(v)
    if header is None:
        raise GridFileError("missing header 'n N h'", None, path)
    if len(values) != header.cell_count:
        raise GridFileError(
            f"expected {header.cell_count} values (N**n), got {len(values)}", first_value_line, path)
    return GridFunction(header, np.array(values))


def read_grid_function(path) -> GridFunction:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GridFileError(f"cannot read grid function: {exc.strerror}", None, path) from None
    return loads_grid_function(text, path)


# ---------------------------------------------------------------------------
# JSON with fixed float formatting


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return format_float(x)
        return json.dumps("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(parts) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in obj]
        return "[" + pad + ("," + pad).join(parts) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj: Any, indent: int = 2) -> str:
    """JSON with insertion-ordered keys and 17-significant-digit floats.

    Non-finite floats are written as the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    return _encode(obj, indent, 0) + "\n"


def _revive(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _revive(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_revive(v) for v in obj]
    if obj in ("inf", "-inf", "nan"):
        return float(obj)
    return obj


def dumps_config(cfg: ScanConfig) -> str:
    return dumps_json(cfg.to_dict())


def loads_config(text: str) -> ScanConfig:
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("scan config must be a JSON object")
    return ScanConfig.from_dict(_revive(data))


def read_config(path) -> ScanConfig:
    return loads_config(Path(path).read_text(encoding="utf-8"))


def write_config(cfg: ScanConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")


CSV_FIELDS = ["item", "functional", "label", "lower_bound", "N", "value", "argmax", "slope",
              "classification"]


def write_report(report: ScanReport | None, fmt: str = "json") -> bytes:
    """Serialize a report as JSON (keys ``config``, ``results``, ``provenance``) or
    CSV (one row per grid size and functional)."""
    if fmt == "json":
        if report is None:
            raise ValueError("cannot write an empty JSON report")
        return dumps_json(report.to_dict()).encode("utf-8")
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for it in [] if report is None else report.items:
        slope = "" if it.slope is None else format_float(it.slope)
        for N, v, a in zip(it.grid_sizes, it.values, it.argmax):
            w.writerow([it.item, it.functional, it.label, str(it.lower_bound).lower(), N,
                        format_float(v), a or "", slope, it.classification])
    return buf.getvalue().encode("utf-8")
