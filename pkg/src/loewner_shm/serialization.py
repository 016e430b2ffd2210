"""Byte-stable JSON/CSV text helpers.

Floats are always written with 17 significant digits so that every
value round-trips bit-exactly and reruns produce identical bytes.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence

import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, Sequence):
        if not obj:
            return "[]"
        # flat numeric lists stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def dump_json(obj, indent: int = 2) -> str:
    """Encode ``obj`` as JSON text with fixed float formatting and a trailing newline."""
    return _encode(obj, indent, 0) + "\n"


def write_text(path, text: str) -> None:
    # newline="\n" keeps LF endings on every platform
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
