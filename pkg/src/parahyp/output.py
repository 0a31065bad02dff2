"""Deterministic text output: 17-significant-digit floats, fixed key order."""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    v = float(v) + 0.0  # folds -0.0 into 0.0
    if math.isnan(v) or math.isinf(v):
        return "null"
    return format(v, ".17g")


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(x, (int, float, np.number)) and not isinstance(x, bool) for x in seq):
            return "[" + ", ".join(_dump(x, indent, level + 1) for x in seq) + "]"
        return "[\n" + ",\n".join(pad + _dump(x, indent, level + 1) for x in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _quote(s: str) -> str:
    import json
    return json.dumps(s)


def dumps(obj, indent: int = 2) -> str:
    return _dump(obj, indent, 0) + "\n"


def write_json(path: Path, obj) -> Path:
    path.write_text(dumps(obj))
    return path


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else fmt(c) for c in row) + "\n")
    return path


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
