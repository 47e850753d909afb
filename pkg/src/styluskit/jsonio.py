"""Deterministic JSON and CSV formatting.

All files the toolkit writes go through these helpers so that identical
data always produces identical bytes: dict keys keep insertion order,
floats are printed with 17 significant digits (lossless for IEEE 754
doubles), and NaN becomes ``null``.
"""

from __future__ import annotations

import json
import math

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "null"
    return format(x, ".17g")


def _format_scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format_float(x)
    if isinstance(x, str):
        return json.dumps(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _is_scalar(x) -> bool:
    return x is None or isinstance(x, (bool, int, float, str, np.integer, np.floating))


def dumps_canonical(obj, indent: int = 0) -> str:
    """Serialize ``obj`` to canonical JSON text (no trailing newline)."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if _is_scalar(obj):
        return _format_scalar(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k))}: {dumps_canonical(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        seq = [x.tolist() if isinstance(x, np.ndarray) else x for x in obj]
        if all(_is_scalar(x) for x in seq):
            return "[" + ", ".join(_format_scalar(x) for x in seq) + "]"
        items = [f"{inner}{dumps_canonical(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_canonical(obj))
        f.write("\n")


def csv_row(values) -> str:
    parts = []
    for v in values:
        if isinstance(v, str):
            parts.append(v)
        elif isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            parts.append(str(int(v)))
        elif math.isnan(float(v)):
            parts.append("nan")
        else:
            parts.append(format_float(v))
    return ",".join(parts)
