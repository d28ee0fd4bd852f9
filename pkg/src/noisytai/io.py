"""Reading and writing distribution documents.

A document is JSON with optional keys ``alphabets`` (name -> labels),
``joint`` (P_UV), ``channel`` (P_Y|X) and ``encoder`` (P_X|U), each matrix a
nested array of decimals. Decimal strings such as ``"0.1"`` are accepted
anywhere a number is. The writer is deterministic: sorted keys, row-major
matrices, 17 significant digits.
"""

from decimal import Decimal, InvalidOperation
import json
import os
from pathlib import Path
import tempfile

from ._validation import ValidationError
from .capacity import Dmc
from .probcore import Alphabet, CondPmf, JointPmf

__all__ = [
    "load_document",
    "parse_document",
    "dump_document",
    "format_number",
    "atomic_write",
    "setting",
]


def _to_float(x, where):
    if isinstance(x, bool):
        raise ValidationError(f"{where}: booleans are not probabilities")
    if isinstance(x, (int, float, Decimal)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(Decimal(x.strip()))
        except InvalidOperation:
            raise ValidationError(f"{where}: {x!r} is not a decimal") from None
    raise ValidationError(f"{where}: expected a number, got {type(x).__name__}")


def _matrix(raw, key):
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        raise ValidationError(f"{key} must be a non-empty nested array")
    width = len(raw[0])
    if any(len(r) != width for r in raw):
        raise ValidationError(f"{key} rows have unequal lengths")
    return [[_to_float(x, f"{key}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(raw)]


def parse_document(text):
    """Parse document text into typed objects plus any extra scalar settings."""
    try:
        raw = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed document: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationError("document must be a JSON object")
    alph = {k: Alphabet.of(v) for k, v in raw.get("alphabets", {}).items()}
    out = {"alphabets": alph}
    if "joint" in raw:
        out["joint"] = JointPmf(_matrix(raw["joint"], "joint"), alph.get("U"), alph.get("V"))
    if "channel" in raw:
        out["channel"] = Dmc(CondPmf(_matrix(raw["channel"], "channel"), alph.get("X"), alph.get("Y")))
    if "encoder" in raw:
        out["encoder"] = CondPmf(_matrix(raw["encoder"], "encoder"), alph.get("U"), alph.get("X"))
    for key, val in raw.items():
        if key not in out and key != "alphabets":
            out[key] = float(val) if isinstance(val, Decimal) else val
    return out


def setting(doc, key, default=None):
    """Scalar setting from a parsed document, decimal strings converted to float."""
    if key not in doc:
        return default
    val = doc[key]
    if isinstance(val, str):
        return _to_float(val, key)
    if isinstance(val, list):
        return [_to_float(v, key) if isinstance(v, str) else v for v in val]
    return val


def load_document(path):
    return parse_document(Path(path).read_text())


def format_number(x):
    x = float(x)
    if x != x or x in (float("inf"), float("-inf")):
        return {float("inf"): "inf", float("-inf"): "-inf"}.get(x, "nan")
    if x == 0:
        return "0"
    return format(x, ".17g")


def _rows(m):
    arr = getattr(m, "probs", None)
    if arr is None:
        arr = getattr(m, "rows", None)
    if arr is None and hasattr(m, "matrix"):
        arr = m.matrix
    if arr is None:
        arr = m
    return [[format_number(v) for v in row] for row in arr]


def dump_document(joint=None, channel=None, encoder=None, alphabets=None, **extra):
    """Serialise to the canonical document text."""
    parts = []
    if alphabets:
        labels = {k: list(a.labels) if a.labels else [str(i) for i in range(a.size)]
                  for k, a in ((k, Alphabet.of(v)) for k, v in alphabets.items())}
        parts.append(("alphabets", json.dumps(labels, sort_keys=True)))
    for key, m in (("channel", channel), ("encoder", encoder), ("joint", joint)):
        if m is not None:
            body = ",\n    ".join("[" + ", ".join(r) + "]" for r in _rows(m))
            parts.append((key, "[\n    " + body + "\n  ]"))
    for key in sorted(extra):
        val = extra[key]
        parts.append((key, format_number(val) if isinstance(val, float) else json.dumps(val, sort_keys=True)))
    parts.sort(key=lambda kv: kv[0])
    return "{\n" + ",\n".join(f'  "{k}": {v}' for k, v in parts) + "\n}\n"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
