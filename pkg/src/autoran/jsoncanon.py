"""Canonical JSON used for wire framing and content digests.

Two implementations (this one and the node runtime) must produce identical
bytes for the same value, so the rules are pinned:

* object keys sorted by code point, compact separators, UTF-8, no escaping
  beyond what ``json`` requires (ensure_ascii off);
* numbers follow ECMAScript ``Number::toString(10)``: integral doubles print
  without a decimal point, everything else uses the shortest round-trip
  digits, switching to exponent form outside [1e-6, 1e21);
* NaN/Infinity are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math


def format_number(value) -> str:
    """Render an int or float exactly as ECMAScript ``String(value)`` would."""
    if isinstance(value, bool):  # bool is an int subclass; route to literals
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if not isinstance(value, float):
        raise TypeError(f"not a number: {value!r}")
    if math.isnan(value) or math.isinf(value):
        raise ValueError("non-finite numbers are not representable on the wire")
    if value == 0.0:
        return "0"
    sign = "-" if value < 0 else ""
    mag = abs(value)
    # repr() gives the shortest round-trip digits; normalize to (digits, n)
    # with value = 0.digits * 10**n, digits having no trailing zeros.
    text = repr(mag)
    if "e" in text or "E" in text:
        mant, _, exp_text = text.lower().partition("e")
        exp = int(exp_text)
    else:
        mant, exp = text, 0
    if "." in mant:
        whole, frac = mant.split(".")
    else:
        whole, frac = mant, ""
    stripped = (whole + frac).lstrip("0")
    lead_zeros = len(whole + frac) - len(stripped)
    n = len(whole) + exp - lead_zeros
    digits = stripped.rstrip("0")
    k = len(digits)
    if k <= n <= 21:
        out = digits + "0" * (n - k)
    elif 0 < n <= 21:
        out = digits[:n] + "." + digits[n:]
    elif -6 < n <= 0:
        out = "0." + "0" * (-n) + digits
    else:
        e = n - 1
        mant = digits[0] + ("." + digits[1:] if k > 1 else "")
        out = f"{mant}e{'+' if e >= 0 else '-'}{abs(e)}"
    return sign + out


def dumps(value) -> str:
    """Serialize to the canonical form (sorted keys, canonical numbers)."""
    parts: list[str] = []
    _write(value, parts)
    return "".join(parts)


def _write(value, parts: list[str]) -> None:
    if value is None:
        parts.append("null")
    elif value is True:
        parts.append("true")
    elif value is False:
        parts.append("false")
    elif isinstance(value, str):
        parts.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (int, float)):
        parts.append(format_number(value))
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(value):
            if i:
                parts.append(",")
            _write(item, parts)
        parts.append("]")
    elif isinstance(value, dict):
        parts.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise TypeError(f"object keys must be strings, got {key!r}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key, ensure_ascii=False))
            parts.append(":")
            _write(value[key], parts)
        parts.append("}")
    else:
        raise TypeError(f"unserializable value: {value!r}")


def digest(value) -> str:
    """sha256 hex digest of the canonical serialization."""
    return hashlib.sha256(dumps(value).encode("utf-8")).hexdigest()


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
