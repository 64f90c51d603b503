"""Deterministic JSON emission with floats at 17 significant digits.

The stdlib encoder formats floats with repr (shortest round-trip), which is
exact but not the fixed-width form the file formats here promise.  This tiny
serializer renders floats with ``format(x, '.17g')`` so outputs are
byte-stable and round-trip exactly; everything else matches ``json.dumps``
with compact separators and insertion order preserved.
"""

from __future__ import annotations

import json
import math

__all__ = ["dumps", "format_float"]


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be serialized as JSON")
    return format(x, ".17g")


def _emit(obj, parts: list[str], indent: int | None, depth: int) -> None:
    if isinstance(obj, bool) or obj is None:
        parts.append("null" if obj is None else "true" if obj else "false")
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, (list, tuple, dict)):
        if isinstance(obj, dict):
            items = list(obj.items())
            open_ch, close_ch = "{", "}"
        else:
            items = list(obj)
            open_ch, close_ch = "[", "]"
        if not items:
            parts.append(open_ch + close_ch)
            return
        lead = "" if indent is None else "\n" + " " * (indent * (depth + 1))
        sep = "," if indent is None else "," + lead
        parts.append(open_ch + lead)
        for i, item in enumerate(items):
            if i:
                parts.append(sep)
            if isinstance(obj, dict):
                key, value = item
                if not isinstance(key, str):
                    raise TypeError(f"JSON object keys must be strings, got {key!r}")
                parts.append(json.dumps(key) + (":" if indent is None else ": "))
                _emit(value, parts, indent, depth + 1)
            else:
                _emit(item, parts, indent, depth + 1)
        parts.append(close_ch if indent is None else "\n" + " " * (indent * depth) + close_ch)
    else:
        raise TypeError(f"{type(obj).__name__} is not JSON-serializable here")


def dumps(obj, indent: int | None = None) -> str:
    parts: list[str] = []
    _emit(obj, parts, indent, 0)
    return "".join(parts)
