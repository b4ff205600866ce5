"""Deterministic JSON emission and report envelopes."""
from __future__ import annotations

import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from .errors import PreconditionError

__all__ = ["to_jsonable", "dumps", "envelope", "write_text"]


def to_jsonable(obj):
    """Convert dataclass reports, numpy scalars and arrays into plain JSON types."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _emit(obj, out):
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, list):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        # JSON has no NaN/inf; emit null so the output stays parseable
        out.append("%.17g" % obj if math.isfinite(obj) else "null")
    elif isinstance(obj, int):
        out.append(str(obj))
    else:
        out.append(json.dumps(obj, ensure_ascii=False))


def dumps(obj):
    """Compact JSON with sorted keys and 17-significant-digit floats."""
    out = []
    _emit(to_jsonable(obj), out)
    return "".join(out)


def envelope(version, config, payload, timestamp=None):
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return {"version": version, "config": config, "timestamp": ts, "payload": payload}


def write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise PreconditionError(f"cannot write {path}: {exc.strerror}") from None
