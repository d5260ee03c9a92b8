"""Canonical structured-text document format.

All persisted documents (run state, reports, plans) use one byte-deterministic
rendering: JSON syntax, sorted keys, 2-space indent, UTF-8, floats at 9
significant digits. Determinism is what makes golden-file tests and
interrupt/resume byte-equality checks possible.
"""

from __future__ import annotations

import json
import math
from typing import Any


class DocumentParseError(ValueError):
    """Malformed canonical document; carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def canon_float(x: float) -> float:
    """Quantize to the 9-significant-digit grid the serializer emits."""
    return float(format(float(x), ".9g"))


def _render_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float not representable: {x!r}")
    s = format(x, ".9g")
    # keep the token unambiguously a float so parsing preserves the type
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def _emit(value: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(_render_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(pad + "  ")
            _emit(item, indent + 1, out)
            out.append(",\n" if i + 1 < len(value) else "\n")
        out.append(pad + "]")
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        keys = sorted(value)
        if any(not isinstance(k, str) for k in keys):
            raise TypeError("document keys must be strings")
        out.append("{\n")
        for i, k in enumerate(keys):
            out.append(pad + "  " + json.dumps(k, ensure_ascii=False) + ": ")
            _emit(value[k], indent + 1, out)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(pad + "}")
    else:
        raise TypeError(f"unsupported document value type: {type(value).__name__}")


def dumps(value: Any) -> bytes:
    out: list[str] = []
    _emit(value, 0, out)
    out.append("\n")
    return "".join(out).encode("utf-8")


def loads(data: bytes) -> Any:
    try:
        return json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise DocumentParseError("invalid UTF-8", e.start) from e
    except json.JSONDecodeError as e:
        raise DocumentParseError(e.msg, e.pos) from e
