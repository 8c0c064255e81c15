"""Deterministic report serialization: JSON, CSV and plain text.

Floats are written with 17 significant digits so every value round-trips
exactly; keys are sorted and lines end in ``\\n``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .errors import MtwistError

__all__ = ["ReportWriteError", "plain", "format_float", "to_json", "to_csv", "to_text",
           "emit_report", "load_report", "FORMATS"]

FORMATS = ("text", "json", "csv")


class ReportWriteError(MtwistError):
    def __init__(self, path, reason):
        super().__init__(f"cannot write report to {path}: {reason}")
        self.path = str(path)


def plain(obj):
    """Convert numpy values, tuples and dataclasses into JSON-ready Python objects."""
    if hasattr(obj, "to_dict") and callable(obj.to_dict):
        return plain(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    # keep the value a float when parsed back
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _json(obj, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for n, k in enumerate(sorted(obj)):
            out.append(f"{pad}{json.dumps(k)}: ")
            _json(obj[k], indent, level + 1, out)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for n, v in enumerate(obj):
            out.append(pad)
            _json(v, indent, level + 1, out)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    else:
        out.append(json.dumps(obj))


def to_json(report, indent: int = 2) -> str:
    out: list[str] = []
    _json(plain(report), indent, 0, out)
    return "".join(out) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (list, dict)):
        return to_json(v, indent=0).replace("\n", "")
    return str(v)


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        items: list[tuple[str, object]] = []
        for k in sorted(obj):
            items += _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
        return items
    if isinstance(obj, list) and obj and any(isinstance(v, (dict, list)) for v in obj):
        items = []
        for i, v in enumerate(obj):
            items += _flatten(v, f"{prefix}[{i}]")
        return items
    return [(prefix, obj)]


def to_csv(report) -> str:
    """The report's ``table`` as CSV, or key/value pairs when it has none."""
    rep = plain(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    table = rep.get("table") if isinstance(rep, dict) else None
    if table is not None:
        w.writerow(table["columns"])
        for row in table["rows"]:
            w.writerow([_cell(v) for v in row])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(rep):
            w.writerow([k, _cell(v)])
    return buf.getvalue()


def to_text(report, banner: str | None = None) -> str:
    rep = plain(report)
    lines = [banner] if banner else []
    table = rep.pop("table", None) if isinstance(rep, dict) else None
    for k, v in _flatten(rep):
        lines.append(f"{k}: {_cell(v)}")
    if table is not None:
        cells = [list(map(str, table["columns"]))] + [[_cell(v) for v in r] for r in table["rows"]]
        widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))] if cells[0] else []
        lines.append("")
        for r in cells:
            lines.append("  ".join(c.rjust(wd) for c, wd in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str = "json", path: str | Path | None = None,
                banner: str | None = None) -> str:
    """Serialize ``report`` and write it to ``path`` (stdout when None or ``-``).

    Returns the serialized text.
    """
    if fmt == "json":
        text = to_json(report)
    elif fmt == "csv":
        text = to_csv(report)
    elif fmt == "text":
        text = to_text(report, banner)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        try:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise ReportWriteError(path, exc.strerror or exc) from exc
    return text


def load_report(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
