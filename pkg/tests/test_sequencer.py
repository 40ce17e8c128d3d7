"""Pulse-sequence DSL: parsing, canonical rendering, binding, sweeps."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvlab.physics.model import AUTO_TARGET, ZERO_TO_MINUS, ZERO_TO_PLUS
from nvlab.sequencer import (LaserStmt, MWStmt, ParStmt, PulseSequence,
                             ReadoutStmt, RepeatStmt, SequenceError,
                             SweepSpec, WaitStmt, Window, build_hahn,
                             build_lifetime, build_odmr_cw, build_rabi,
                             build_ramsey, expand_sweep, parse_sequence,
                             render_sequence)
from nvlab.units import TIME_GRID, UnitError, parse_quantity, snap_time


class TestUnits:
    def test_quantities(self):
        assert parse_quantity("3us") == pytest.approx(3e-6)
        assert parse_quantity("2.87 GHz") == pytest.approx(2.87e9)
        assert parse_quantity("0.5mW") == pytest.approx(0.5e-3)
        assert parse_quantity("90deg") == pytest.approx(math.pi / 2)
        assert parse_quantity("42") == 42.0

    def test_unknown_unit(self):
        with pytest.raises(UnitError):
            parse_quantity("3 parsec")

    def test_snap_time(self):
        assert snap_time(24.5e-9) == pytest.approx(24.5e-9)
        assert snap_time(24.37e-9) == pytest.approx(24.25e-9)
        # ties round up
        assert snap_time(0.125e-9) == pytest.approx(0.25e-9)
        assert snap_time(1.0 / (2 * 20.4e6)) == pytest.approx(24.5e-9)


class TestParser:
    SOURCE = """
    seq demo;
    var tau;
    laser 3us power 1mW;
    wait 1us;
    mw tau freq 2.87GHz amp 20.4MHz;
    wait 500ns;
    laser 3us power 1mW readout 0..800ns;
    """

    def test_parse_structure(self):
        seq = parse_sequence(self.SOURCE)
        assert seq.name == "demo"
        assert list(seq.variables) == ["tau"]
        kinds = [type(s).__name__ for s in seq.statements]
        assert kinds == ["LaserStmt", "WaitStmt", "MWStmt", "WaitStmt",
                         "LaserStmt"]
        mw = seq.statements[2]
        assert mw.duration == "tau"
        assert mw.target == AUTO_TARGET

    def test_explicit_target(self):
        seq = parse_sequence("seq t; mw 10ns freq 2.87GHz amp 1MHz "
                             "target minus; readout 0..10ns;")
        assert seq.statements[0].target == ZERO_TO_MINUS

    def test_undeclared_variable_with_location(self):
        with pytest.raises(SequenceError, match=r"undeclared.*at 2:7"):
            parse_sequence("seq t;\nlaser x;\nreadout 0..1us;")

    def test_missing_mw_attributes(self):
        with pytest.raises(SequenceError, match="requires freq and amp"):
            parse_sequence("seq t; mw 10ns freq 2.87GHz; readout 0..1us;")

    def test_unknown_statement(self):
        with pytest.raises(SequenceError, match="unknown statement"):
            parse_sequence("seq t; explode 3us; readout 0..1us;")

    def test_unterminated_block(self):
        with pytest.raises(SequenceError, match="unterminated block"):
            parse_sequence("seq t; repeat 3 { wait 1us;")

    def test_unexpected_character(self):
        with pytest.raises(SequenceError, match="unexpected character"):
            parse_sequence("seq t; wait 1us; @")

    def test_bad_unit_reported(self):
        with pytest.raises(SequenceError, match="unknown unit"):
            parse_sequence("seq t; wait 3floops; readout 0..1us;")

    def test_unused_variable_rejected(self):
        with pytest.raises(SequenceError, match="unreferenced"):
            parse_sequence("seq t; var tau; wait 1us; readout 0..1us;")

    def test_no_readout_rejected(self):
        with pytest.raises(SequenceError, match="no readout"):
            parse_sequence("seq t; wait 1us;")

    def test_repeat_and_par(self):
        seq = parse_sequence("""
        seq blocks;
        repeat 2 {
          par {
            laser 1us power 1mW;
            mw 500ns freq 2.87GHz amp 1MHz;
          }
        }
        readout 0..1us tagged;
        """)
        rep = seq.statements[0]
        assert isinstance(rep, RepeatStmt) and rep.count == 2
        assert isinstance(rep.body[0], ParStmt)
        assert seq.statements[1].window.tagged


class TestRender:
    def test_fixpoint_for_builders(self):
        seqs = [build_rabi(100e-9, 2.87e9, 20.4e6),
                build_ramsey(100e-9, 20.4e6, 2.87e9),
                build_hahn(200e-9, 20.4e6, 2.87e9),
                build_odmr_cw(2.86e9, 2.88e9, 11)[0],
                build_lifetime(1e-6)]
        for seq in seqs:
            text = render_sequence(seq)
            again = render_sequence(parse_sequence(text))
            assert again == text

    def test_roundtrip_preserves_semantics(self):
        seq = build_rabi(100e-9, 2.87e9, 20.4e6)
        seq2 = parse_sequence(render_sequence(seq))
        tl1 = seq.bind({"tau": 100e-9})
        tl2 = seq2.bind({"tau": 100e-9})
        assert tl1.segments() == tl2.segments()
        assert tl1.windows == tl2.windows

    def test_explicit_target_survives(self):
        seq = parse_sequence("seq t; mw 10ns freq 2.87GHz amp 1MHz "
                             "target plus; readout 0..10ns;")
        assert "target plus" in render_sequence(seq)


_durations = st.floats(min_value=1e-9, max_value=1e-5, allow_nan=False,
                       allow_infinity=False)
_powers = st.floats(min_value=0.0, max_value=1e-2, allow_nan=False)
_amps = st.floats(min_value=1e3, max_value=1e8, allow_nan=False)
_phases = st.floats(min_value=0.0, max_value=6.28, allow_nan=False)

_leaf = st.one_of(
    st.builds(WaitStmt, duration=_durations),
    st.builds(LaserStmt, duration=_durations, power=_powers),
    st.builds(MWStmt, duration=_durations,
              frequency=st.floats(min_value=1e9, max_value=4e9,
                                  allow_nan=False),
              amplitude=_amps, phase=_phases,
              target=st.sampled_from([AUTO_TARGET, ZERO_TO_PLUS,
                                      ZERO_TO_MINUS])),
)

_statement = st.recursive(
    _leaf,
    lambda inner: st.one_of(
        st.builds(RepeatStmt, count=st.integers(min_value=1, max_value=3),
                  body=st.lists(inner, min_size=1, max_size=3).map(tuple)),
        st.builds(ParStmt,
                  body=st.lists(_leaf, min_size=1, max_size=2).map(tuple)),
    ),
    max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(st.lists(_statement, min_size=0, max_size=5))
def test_render_parse_fixpoint_fuzz(stmts):
    """render -> parse -> render is the identity on canonical text."""
    stmts = list(stmts)
    stmts.append(ReadoutStmt(Window(0.0, 1e-6)))
    seq = PulseSequence(name="fuzz", statements=tuple(stmts), variables={})
    text = render_sequence(seq)
    seq2 = parse_sequence(text)
    assert render_sequence(seq2) == text


class TestBinding:
    def test_durations_snap_to_grid(self):
        seq = build_rabi(24.37e-9, 2.87e9, 20.4e6)
        tl = seq.bind({"tau": 24.37e-9})
        mw = tl.mw[0]
        assert mw.duration == pytest.approx(round(24.37e-9 / TIME_GRID)
                                            * TIME_GRID)

    def test_unbound_variable(self):
        seq = build_rabi(100e-9, 2.87e9, 20.4e6)
        with pytest.raises(SequenceError, match="unbound"):
            seq.bind({})

    def test_overlapping_laser_pulses_rejected(self):
        seq = PulseSequence(
            name="bad",
            statements=(ParStmt((LaserStmt(duration=2e-6),
                                 LaserStmt(duration=1e-6))),
                        ReadoutStmt(Window(0.0, 1e-6))),
            variables={})
        with pytest.raises(SequenceError, match="overlapping"):
            seq.bind({})

    def test_window_must_have_positive_length(self):
        seq = PulseSequence(name="bad",
                            statements=(ReadoutStmt(Window(1e-6, 1e-6)),),
                            variables={})
        with pytest.raises(SequenceError, match="positive length"):
            seq.bind({})

    def test_segments_merge_channels(self):
        tl = build_rabi(100e-9, 2.87e9, 20.4e6).bind({"tau": 100e-9})
        segs = tl.segments()
        assert sum(s.duration for s in segs) == pytest.approx(tl.duration)
        mw_segs = [s for s in segs if s.mw_on]
        assert len(mw_segs) == 1
        assert mw_segs[0].mw_rabi == pytest.approx(20.4e6)
        assert mw_segs[0].duration == pytest.approx(100e-9)


class TestSweep:
    def test_linear_and_log_values(self):
        lin = SweepSpec("tau", 0.0, 1e-6, 5)
        assert lin.values()[2] == pytest.approx(0.5e-6)
        log = SweepSpec("tau", 1e-9, 1e-6, 4, spacing="log")
        assert log.values()[1] == pytest.approx(1e-8)

    def test_validation(self):
        with pytest.raises(SequenceError):
            SweepSpec("tau", 0.0, 1e-6, 1)
        with pytest.raises(SequenceError):
            SweepSpec("tau", 1e-6, 1e-6, 3)
        with pytest.raises(SequenceError):
            SweepSpec("tau", 0.0, 1e-6, 3, spacing="log")

    def test_expand_sweep_in_order(self):
        seq = build_rabi(0.0, 2.87e9, 20.4e6)
        sweep = SweepSpec("tau", 10e-9, 50e-9, 5)
        tls = expand_sweep(seq, sweep)
        durations = [tl.mw[0].duration for tl in tls]
        assert durations == sorted(durations)
        assert len(tls) == 5

    def test_expand_sweep_unknown_variable(self):
        seq = build_rabi(0.0, 2.87e9, 20.4e6)
        with pytest.raises(SequenceError, match="not.*declared"):
            expand_sweep(seq, SweepSpec("bogus", 0.0, 1.0, 3))
