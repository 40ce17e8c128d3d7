"""Pulse-sequence data model, timeline binding, builders, and sweeps.

A PulseSequence is a small sequential program over two channels (laser and
MW) with named sweep variables; binding a set of variable values produces a
concrete, validated timeline whose piecewise-constant control segments feed
the physics engine. All times snap to the 0.25 ns sample grid.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..analysis.routines import pulse_calibration
from ..physics.model import (AUTO_TARGET, ControlSegment, ZERO_TO_MINUS,
                             ZERO_TO_PLUS)
from ..units import snap_time

# Expressions in statements are either SI literals or variable references.
Expr = Union[float, str]

DEFAULT_LASER_POWER = 1.0e-3       # W, pulsed init/readout
DEFAULT_READOUT_WINDOW = 800e-9    # s, from the laser-on edge
TCSPC_RESOLUTION = 250e-12         # s, finest histogram bin

# CW-ODMR calibration fixture: laser power and MW Rabi frequency solved so
# the default spectrum shows a 4 % contrast and 11 MHz FWHM dip (see
# nvlab.calibration). These are fixture values, not measured constants.
CW_LASER_POWER = 2.6333e-3
CW_MW_RABI = 0.9438e6
CW_DWELL = 10e-3


class SequenceError(ValueError):
    """Structural or semantic pulse-sequence error."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        loc = f" at {line}:{col}" if line else ""
        super().__init__(message + loc)


def _refs(expr: Expr) -> List[str]:
    return [expr] if isinstance(expr, str) else []


def _resolve(expr: Expr, values: Dict[str, float]) -> float:
    if isinstance(expr, str):
        try:
            return values[expr]
        except KeyError:
            raise SequenceError(f"unbound variable {expr!r}") from None
    return float(expr)


@dataclass(frozen=True)
class Window:
    """Count-integration window relative to its anchor time."""

    start: Expr
    stop: Expr
    tagged: bool = False


@dataclass(frozen=True)
class LaserStmt:
    duration: Expr
    power: Expr = DEFAULT_LASER_POWER
    readout: Optional[Window] = None


@dataclass(frozen=True)
class MWStmt:
    duration: Expr
    frequency: Expr
    amplitude: Expr
    phase: Expr = 0.0
    target: str = AUTO_TARGET


@dataclass(frozen=True)
class WaitStmt:
    duration: Expr


@dataclass(frozen=True)
class ReadoutStmt:
    window: Window


@dataclass(frozen=True)
class RepeatStmt:
    count: int
    body: Tuple["Statement", ...]


@dataclass(frozen=True)
class ParStmt:
    """Statements started simultaneously; the block lasts as long as the
    longest member."""

    body: Tuple["Statement", ...]


Statement = Union[LaserStmt, MWStmt, WaitStmt, ReadoutStmt, RepeatStmt, ParStmt]


def _walk_exprs(stmt: Statement):
    if isinstance(stmt, LaserStmt):
        yield stmt.duration
        yield stmt.power
        if stmt.readout:
            yield stmt.readout.start
            yield stmt.readout.stop
    elif isinstance(stmt, MWStmt):
        yield from (stmt.duration, stmt.frequency, stmt.amplitude, stmt.phase)
    elif isinstance(stmt, WaitStmt):
        yield stmt.duration
    elif isinstance(stmt, ReadoutStmt):
        yield stmt.window.start
        yield stmt.window.stop
    elif isinstance(stmt, (RepeatStmt, ParStmt)):
        for s in stmt.body:
            yield from _walk_exprs(s)


def _has_readout(stmts) -> bool:
    for s in stmts:
        if isinstance(s, ReadoutStmt):
            return True
        if isinstance(s, LaserStmt) and s.readout:
            return True
        if isinstance(s, (RepeatStmt, ParStmt)) and _has_readout(s.body):
            return True
    return False


@dataclass(frozen=True)
class PulseSequence:
    """A validated laser/MW pulse program with named sweep variables."""

    name: str
    statements: Tuple[Statement, ...]
    variables: Dict[str, Optional[float]] = field(default_factory=dict)

    def __post_init__(self):
        refs = set()
        for s in self.statements:
            for e in _walk_exprs(s):
                refs.update(_refs(e))
        undeclared = refs - set(self.variables)
        if undeclared:
            raise SequenceError(f"undeclared variable(s): {sorted(undeclared)}")
        unused = set(self.variables) - refs
        if unused:
            raise SequenceError(f"declared but unreferenced variable(s): "
                                f"{sorted(unused)}")
        if not _has_readout(self.statements):
            raise SequenceError("sequence has no readout window")

    def defaults(self) -> Dict[str, float]:
        missing = [n for n, v in self.variables.items() if v is None]
        if missing:
            raise SequenceError(f"variables without value: {missing}")
        return {n: float(v) for n, v in self.variables.items()}

    def bind(self, values: Optional[Dict[str, float]] = None) -> "Timeline":
        """Substitute variables and build the concrete, validated timeline."""
        vals = self.defaults() if values is None else dict(values)
        builder = _TimelineBuilder(vals)
        builder.run(self.statements)
        return builder.finish(self.name)


@dataclass(frozen=True)
class LaserPulse:
    start: float
    duration: float
    power: float


@dataclass(frozen=True)
class MWPulse:
    start: float
    duration: float
    frequency: float
    amplitude: float
    phase: float
    target: str


@dataclass(frozen=True)
class ReadoutWindow:
    start: float
    duration: float
    tagged: bool = False


class _TimelineBuilder:
    def __init__(self, values: Dict[str, float]):
        self.values = values
        self.clock = 0.0
        self.laser: List[LaserPulse] = []
        self.mw: List[MWPulse] = []
        self.windows: List[ReadoutWindow] = []

    def _duration(self, expr: Expr) -> float:
        d = snap_time(_resolve(expr, self.values))
        if d < 0:
            raise SequenceError(f"negative duration {d} after substitution")
        return d

    def _window(self, w: Window, anchor: float) -> None:
        a = snap_time(_resolve(w.start, self.values))
        b = snap_time(_resolve(w.stop, self.values))
        if b <= a:
            raise SequenceError("readout window must have positive length")
        self.windows.append(ReadoutWindow(start=anchor + a, duration=b - a,
                                          tagged=w.tagged))

    def _emit(self, stmt: Statement, start: float) -> float:
        """Emit one statement at the given start time; returns its length."""
        if isinstance(stmt, WaitStmt):
            return self._duration(stmt.duration)
        if isinstance(stmt, LaserStmt):
            d = self._duration(stmt.duration)
            power = _resolve(stmt.power, self.values)
            if power < 0:
                raise SequenceError("laser power must be >= 0")
            if d > 0:
                self.laser.append(LaserPulse(start, d, power))
            if stmt.readout:
                self._window(stmt.readout, start)
            return d
        if isinstance(stmt, MWStmt):
            d = self._duration(stmt.duration)
            if d > 0:
                self.mw.append(MWPulse(
                    start, d,
                    frequency=_resolve(stmt.frequency, self.values),
                    amplitude=_resolve(stmt.amplitude, self.values),
                    phase=_resolve(stmt.phase, self.values),
                    target=stmt.target))
            return d
        if isinstance(stmt, ReadoutStmt):
            self._window(stmt.window, start)
            return 0.0
        raise SequenceError(f"statement {type(stmt).__name__} not allowed here")

    def run(self, stmts) -> None:
        for stmt in stmts:
            if isinstance(stmt, RepeatStmt):
                if stmt.count < 1:
                    raise SequenceError("repeat count must be >= 1")
                for _ in range(stmt.count):
                    self.run(stmt.body)
            elif isinstance(stmt, ParStmt):
                length = 0.0
                for s in stmt.body:
                    length = max(length, self._emit(s, self.clock))
                self.clock += length
            else:
                self.clock += self._emit(stmt, self.clock)

    def finish(self, name: str) -> "Timeline":
        for pulses, channel in ((self.laser, "laser"), (self.mw, "mw")):
            pulses.sort(key=lambda p: p.start)
            for a, b in zip(pulses, pulses[1:]):
                if a.start + a.duration > b.start + 1e-15:
                    raise SequenceError(f"overlapping pulses on {channel} "
                                        f"channel near t={b.start}")
        end = self.clock
        for w in self.windows:
            end = max(end, w.start + w.duration)
        for p in list(self.laser) + list(self.mw):
            end = max(end, p.start + p.duration)
        if not (end > 0 and math.isfinite(end)):
            raise SequenceError("timeline has no positive finite duration")
        return Timeline(name=name, laser=tuple(self.laser), mw=tuple(self.mw),
                        windows=tuple(self.windows), duration=end)


@dataclass(frozen=True)
class Timeline:
    """Concrete, fully-substituted timeline."""

    name: str
    laser: Tuple[LaserPulse, ...]
    mw: Tuple[MWPulse, ...]
    windows: Tuple[ReadoutWindow, ...]
    duration: float

    @property
    def frame_frequency(self) -> float:
        """Rotating-frame frequency: that of the first MW pulse, if any."""
        return self.mw[0].frequency if self.mw else 0.0

    def segments(self, b_axis: float = 0.0) -> List[ControlSegment]:
        """Merge both channels into piecewise-constant control segments."""
        edges = {0.0, self.duration}
        for p in list(self.laser) + list(self.mw):
            edges.add(p.start)
            edges.add(p.start + p.duration)
        times = sorted(edges)
        frame = self.frame_frequency
        segs: List[ControlSegment] = []
        for t0, t1 in zip(times, times[1:]):
            if t1 - t0 <= 1e-15:
                continue
            mid = 0.5 * (t0 + t1)
            power = 0.0
            for p in self.laser:
                if p.start <= mid < p.start + p.duration:
                    power = p.power
            seg = ControlSegment(duration=t1 - t0, laser_power=power,
                                 mw_frequency=frame, b_axis=b_axis)
            for p in self.mw:
                if p.start <= mid < p.start + p.duration:
                    seg = replace(seg, mw_on=True, mw_frequency=p.frequency,
                                  mw_rabi=p.amplitude, mw_phase=p.phase,
                                  target_transition=p.target)
            segs.append(seg)
        return segs


@dataclass(frozen=True)
class SweepSpec:
    """Values taken by one sequence variable across a sweep."""

    variable: str
    start: float
    stop: float
    points: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.points < 2:
            raise SequenceError("sweep needs at least 2 points")
        if self.start == self.stop:
            raise SequenceError("sweep start and stop must differ")
        if self.spacing not in ("linear", "log"):
            raise SequenceError(f"unknown spacing {self.spacing!r}")
        if self.spacing == "log" and (self.start <= 0 or self.stop <= 0):
            raise SequenceError("log spacing requires positive endpoints")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


def expand_sweep(seq: PulseSequence, sweep: SweepSpec,
                 fixed: Optional[Dict[str, float]] = None) -> List[Timeline]:
    """One concrete timeline per sweep point, in sweep order."""
    if sweep.variable not in seq.variables:
        raise SequenceError(f"sweep variable {sweep.variable!r} is not "
                            f"declared in sequence {seq.name!r}")
    base = {n: v for n, v in seq.variables.items() if v is not None}
    if fixed:
        base.update(fixed)
    timelines = []
    for v in sweep.values():
        values = dict(base)
        values[sweep.variable] = float(v)
        timelines.append(seq.bind(values))
    return timelines


# --- Builders for the experiment suite -----------------------------------

def build_rabi(tau: float, mw_frequency: float, omega: float,
               init_duration: float = 3e-6,
               laser_power: float = DEFAULT_LASER_POWER,
               readout_window: float = DEFAULT_READOUT_WINDOW) -> PulseSequence:
    """Init laser, MW pulse of length tau, readout laser with early window."""
    if tau < 0:
        raise SequenceError("tau must be >= 0")
    return PulseSequence(
        name="rabi",
        statements=(
            LaserStmt(duration=init_duration, power=laser_power),
            WaitStmt(1e-6),
            MWStmt(duration="tau", frequency=mw_frequency, amplitude=omega),
            WaitStmt(500e-9),
            LaserStmt(duration=init_duration, power=laser_power,
                      readout=Window(0.0, readout_window)),
        ),
        variables={"tau": tau},
    )


def build_hahn(tau: float, omega: float, mw_frequency: float,
               init_duration: float = 3e-6,
               laser_power: float = DEFAULT_LASER_POWER,
               readout_window: float = DEFAULT_READOUT_WINDOW) -> PulseSequence:
    """Laser init; pi/2 - tau - pi - tau - pi/2; laser readout."""
    if tau < 0:
        raise SequenceError("tau must be >= 0")
    tau_pi, tau_pi_2 = pulse_calibration(omega)
    return PulseSequence(
        name="hahn",
        statements=(
            LaserStmt(duration=init_duration, power=laser_power),
            WaitStmt(1e-6),
            MWStmt(duration=tau_pi_2, frequency=mw_frequency, amplitude=omega),
            WaitStmt("tau"),
            MWStmt(duration=tau_pi, frequency=mw_frequency, amplitude=omega),
            WaitStmt("tau"),
            MWStmt(duration=tau_pi_2, frequency=mw_frequency, amplitude=omega),
            WaitStmt(500e-9),
            LaserStmt(duration=init_duration, power=laser_power,
                      readout=Window(0.0, readout_window)),
        ),
        variables={"tau": tau},
    )


def build_ramsey(tau: float, omega: float, mw_frequency: float,
                 init_duration: float = 3e-6,
                 laser_power: float = DEFAULT_LASER_POWER,
                 readout_window: float = DEFAULT_READOUT_WINDOW) -> PulseSequence:
    """Laser init; pi/2 - tau - pi/2 free precession; laser readout."""
    if tau < 0:
        raise SequenceError("tau must be >= 0")
    _, tau_pi_2 = pulse_calibration(omega)
    return PulseSequence(
        name="ramsey",
        statements=(
            LaserStmt(duration=init_duration, power=laser_power),
            WaitStmt(1e-6),
            MWStmt(duration=tau_pi_2, frequency=mw_frequency, amplitude=omega),
            WaitStmt("tau"),
            MWStmt(duration=tau_pi_2, frequency=mw_frequency, amplitude=omega),
            WaitStmt(500e-9),
            LaserStmt(duration=init_duration, power=laser_power,
                      readout=Window(0.0, readout_window)),
        ),
        variables={"tau": tau},
    )


def build_odmr_cw(f_start: float, f_stop: float, points: int,
                  dwell: float = CW_DWELL,
                  laser_power: float = CW_LASER_POWER,
                  omega: float = CW_MW_RABI):
    """Continuous laser + MW with swept frequency; one window per point."""
    if not f_start < f_stop:
        raise SequenceError("f_start must be below f_stop")
    seq = PulseSequence(
        name="odmr_cw",
        statements=(
            ParStmt((
                LaserStmt(duration=dwell, power=laser_power,
                          readout=Window(0.0, dwell)),
                MWStmt(duration=dwell, frequency="f", amplitude=omega),
            )),
        ),
        variables={"f": 0.5 * (f_start + f_stop)},
    )
    sweep = SweepSpec(variable="f", start=f_start, stop=f_stop, points=points)
    return seq, sweep


def build_lifetime(excitation: float, dark_window: float = 200e-9,
                   laser_power: float = DEFAULT_LASER_POWER,
                   bin_width: float = TCSPC_RESOLUTION) -> PulseSequence:
    """Laser pulse, then a time-tagged dark window for TCSPC histogramming."""
    if excitation <= 0:
        raise SequenceError("excitation duration must be > 0")
    if dark_window < bin_width:
        raise SequenceError("dark window shorter than one TCSPC bin")
    return PulseSequence(
        name="lifetime",
        statements=(
            LaserStmt(duration=excitation, power=laser_power),
            ReadoutStmt(Window(0.0, dark_window, tagged=True)),
        ),
        variables={},
    )
