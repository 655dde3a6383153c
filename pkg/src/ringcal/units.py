"""Suffix-aware parsing of lengths and times into SI floats."""

from __future__ import annotations

import re

_LENGTH = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6}
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zµ]*)\s*$")


def _parse(value, table, kind) -> float:
    if isinstance(value, bool):
        raise ValueError(f"invalid {kind}: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _NUM.match(str(value))
    if not m:
        raise ValueError(f"invalid {kind}: {value!r}")
    number, unit = m.groups()
    if unit == "":
        return float(number)
    if unit not in table:
        raise ValueError(f"unknown {kind} unit {unit!r} in {value!r}; expected one of {sorted(table)}")
    return float(number) * table[unit]


def parse_length(value) -> float:
    """``"0.6mm"`` -> ``6e-4``. Bare numbers are meters."""
    return _parse(value, _LENGTH, "length")


def parse_time(value) -> float:
    """``"10us"`` -> ``1e-5``. Bare numbers are seconds."""
    return _parse(value, _TIME, "time")
