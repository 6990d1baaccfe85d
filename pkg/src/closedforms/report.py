"""Deterministic report serialisation."""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction

import numpy as np

TOOL_VERSION = "0.1.0"

# every verdict string a report may carry; parametrised ones by prefix
VERDICTS = (
    "pass",
    "fail",
    "fibration",
    "independence failed",
    "k exceeds first Betti number",
    "not closed",
    "commutative Liouville",
)
VERDICT_PREFIXES = (
    "covering degree ",
    "torus T^",
    "non-commutative rank ",
    "not integrable: ",
    "inconclusive: ",
)


def check_verdict(v: str) -> str:
    if v in VERDICTS or v.startswith(VERDICT_PREFIXES):
        return v
    raise ValueError(f"unknown verdict {v!r}")


def num(x) -> str:
    """Decimal string with 17 significant digits (exact for rationals)."""
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers in reports")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return format(float(x), ".17g")


def digest(path_or_bytes) -> str:
    data = path_or_bytes
    if not isinstance(data, (bytes, bytearray)):
        with open(path_or_bytes, "rb") as fh:
            data = fh.read()
    return hashlib.sha256(data).hexdigest()


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"

