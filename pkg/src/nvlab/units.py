"""Unit parsing and the shared AWG-like time grid.

All sequence times snap to an integer grid of 0.25 ns (nearest, ties
rounding up), matching the 12.25 ns / 24.5 ns pulse durations the
calibration chain produces.
"""

import math
import re

TIME_GRID = 0.25e-9

_UNIT_SCALE = {
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9,
    "ps": 1e-12,
    "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9,
    "w": 1.0, "mw": 1e-3, "uw": 1e-6, "µw": 1e-6, "nw": 1e-9,
    "t": 1.0, "mt": 1e-3, "ut": 1e-6, "µt": 1e-6, "nt": 1e-9,
    "rad": 1.0, "deg": math.pi / 180.0,
    "": 1.0,
}

_QTY_RE = re.compile(r"^([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(\S*)$")


class UnitError(ValueError):
    pass


def parse_quantity(text: str) -> float:
    """Parse '3us', '20.4 MHz', '0.5mW', '90deg' into SI units."""
    m = _QTY_RE.match(text.strip())
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, unit = m.groups()
    key = unit.lower()
    if key not in _UNIT_SCALE:
        raise UnitError(f"unknown unit {unit!r} in {text!r}")
    return float(value) * _UNIT_SCALE[key]


def snap_time(t: float, grid: float = TIME_GRID) -> float:
    """Snap a time to the sample grid: nearest multiple, ties round up."""
    n = math.floor(t / grid + 0.5)
    return n * grid
