"""Pulse-sequence DSL, builders, and sweep expansion."""

from .core import (CW_DWELL, CW_LASER_POWER, CW_MW_RABI,
                   DEFAULT_LASER_POWER, DEFAULT_READOUT_WINDOW,
                   TCSPC_RESOLUTION, LaserPulse, LaserStmt, MWPulse, MWStmt,
                   ParStmt, PulseSequence, ReadoutStmt, ReadoutWindow,
                   RepeatStmt, SequenceError, SweepSpec, Timeline, WaitStmt,
                   Window, build_hahn, build_lifetime, build_odmr_cw,
                   build_rabi, build_ramsey, expand_sweep)
from .parser import parse_sequence
from .render import render_sequence

__all__ = [
    "CW_DWELL", "CW_LASER_POWER", "CW_MW_RABI", "DEFAULT_LASER_POWER",
    "DEFAULT_READOUT_WINDOW", "TCSPC_RESOLUTION",
    "LaserPulse", "LaserStmt", "MWPulse", "MWStmt", "ParStmt",
    "PulseSequence", "ReadoutStmt", "ReadoutWindow", "RepeatStmt",
    "SequenceError", "SweepSpec", "Timeline", "WaitStmt", "Window",
    "build_hahn", "build_lifetime", "build_odmr_cw", "build_rabi",
    "build_ramsey",
    "expand_sweep", "parse_sequence", "render_sequence",
]
