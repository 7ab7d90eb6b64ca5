"""Byte-deterministic JSON and CSV emission.

Dictionaries are serialized in insertion order and floats are printed with 17
significant digits, so identical values always produce identical bytes and
every double round-trips exactly.
"""

from __future__ import annotations

import numpy as np


def _fmt_float(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    text = format(float(x), ".17g")
    # Keep a float-typed token so readers do not reparse whole values as ints.
    if "e" not in text and "." not in text:
        text += ".0"
    return text


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def dumps(obj) -> str:
    """Serialize dicts/lists/scalars; dict key order is preserved as given."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return f'"{_escape(obj)}"'
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, dict):
        items = ", ".join(f'"{_escape(str(k))}": {dumps(v)}' for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def write_csv(rows: list[dict], path: str) -> None:
    """Write homogeneous record rows; header from the first row's key order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if not rows:
            return
        cols = list(rows[0].keys())
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for c in cols:
                v = row[c]
                if isinstance(v, (float, np.floating)):
                    cells.append(_fmt_float(float(v)))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
