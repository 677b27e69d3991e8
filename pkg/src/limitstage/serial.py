"""Canonical JSON and rational-string helpers.

Run logs must be byte-identical across executions, so every JSON writer in
the package goes through :func:`canonical_dumps` (sorted keys, fixed
separators, ASCII only, no floats).
"""

from __future__ import annotations

import json
from fractions import Fraction


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def dump_path(path, obj) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(canonical_dumps(obj))
        fh.write("\n")


def load_path(path):
    with open(path, "r", encoding="ascii") as fh:
        return json.load(fh)


def frac_str(q: Fraction) -> str:
    """Render a rational as ``p/q`` (``p`` alone when integral)."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def frac_parse(text: str) -> Fraction:
    if isinstance(text, int):
        return Fraction(text)
    return Fraction(text)
