"""Canonical renderer for pulse sequences.

The canonical form is deterministic and byte-identical for a given
sequence: values are printed with repr() in SI base units (s, Hz, W, rad)
so that render -> parse is an exact fixpoint, one statement per line,
blocks indented by two spaces.
"""

from typing import List

from ..physics.model import AUTO_TARGET, ZERO_TO_PLUS
from .core import (Expr, LaserStmt, MWStmt, ParStmt, PulseSequence,
                   ReadoutStmt, RepeatStmt, WaitStmt, Window)


def _expr(e: Expr, unit: str) -> str:
    if isinstance(e, str):
        return e
    return f"{e!r}{unit}"


def _window(w: Window) -> str:
    text = f"readout {_expr(w.start, 's')}..{_expr(w.stop, 's')}"
    if w.tagged:
        text += " tagged"
    return text


def _stmt_lines(stmt, indent: int, out: List[str]) -> None:
    pad = "  " * indent
    if isinstance(stmt, LaserStmt):
        line = f"laser {_expr(stmt.duration, 's')} power {_expr(stmt.power, 'W')}"
        if stmt.readout:
            line += " " + _window(stmt.readout)
        out.append(pad + line + ";")
    elif isinstance(stmt, MWStmt):
        line = (f"mw {_expr(stmt.duration, 's')}"
                f" freq {_expr(stmt.frequency, 'Hz')}"
                f" amp {_expr(stmt.amplitude, 'Hz')}"
                f" phase {_expr(stmt.phase, 'rad')}")
        if stmt.target != AUTO_TARGET:
            line += " target " + ("plus" if stmt.target == ZERO_TO_PLUS
                                  else "minus")
        out.append(pad + line + ";")
    elif isinstance(stmt, WaitStmt):
        out.append(pad + f"wait {_expr(stmt.duration, 's')};")
    elif isinstance(stmt, ReadoutStmt):
        out.append(pad + _window(stmt.window) + ";")
    elif isinstance(stmt, RepeatStmt):
        out.append(pad + f"repeat {stmt.count} {{")
        for s in stmt.body:
            _stmt_lines(s, indent + 1, out)
        out.append(pad + "}")
    elif isinstance(stmt, ParStmt):
        out.append(pad + "par {")
        for s in stmt.body:
            _stmt_lines(s, indent + 1, out)
        out.append(pad + "}")
    else:
        raise TypeError(f"cannot render {type(stmt).__name__}")


def render_sequence(seq: PulseSequence) -> str:
    """Deterministic canonical text for a sequence."""
    out = [f"seq {seq.name};"]
    for name, default in seq.variables.items():
        if default is None:
            out.append(f"var {name};")
        else:
            out.append(f"var {name} = {default!r};")
    for stmt in seq.statements:
        _stmt_lines(stmt, 0, out)
    return "\n".join(out) + "\n"
