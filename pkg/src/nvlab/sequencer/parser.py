"""Parser for the line-oriented `.seq` pulse-sequence DSL.

Grammar (semicolon-separated statements, `#` comments):

    seq <name> ;
    var <name> [= <quantity>] ;
    laser <dur> [power <p>] [readout <a>..<b> [tagged]] ;
    mw <dur> freq <f> amp <a> [phase <p>] [target plus|minus] ;
    wait <dur> ;
    readout <a>..<b> [tagged] ;
    repeat <n> { <statements> }
    par { <statements> }

Quantities are numbers with an attached unit (3us, 2.87GHz, 0.5mW, 90deg);
bare numbers are SI values. Any identifier in a value slot references a
declared variable.
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from ..units import UnitError, parse_quantity
from ..physics.model import AUTO_TARGET, ZERO_TO_MINUS, ZERO_TO_PLUS
from .core import (Expr, LaserStmt, MWStmt, ParStmt, PulseSequence,
                   ReadoutStmt, RepeatStmt, SequenceError, Statement,
                   WaitStmt, Window)

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<dots>\.\.)
  | (?P<quantity>[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?[A-Za-zµ]*)
  | (?P<ident>[A-Za-z_µ][A-Za-z0-9_µ]*)
  | (?P<punct>[;{}=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(source: str) -> List[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise SequenceError(f"unexpected character {source[pos]!r}",
                                line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(Token(kind, text, line, col))
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.i = 0
        self.name = "sequence"
        self.variables = {}

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise SequenceError(message, tok.line, tok.col)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            self.error(f"expected {want!r}, found {tok.text!r}", tok)
        return tok

    def end_statement(self):
        self.expect("punct", ";")

    def value(self) -> Expr:
        tok = self.next()
        if tok.kind == "quantity":
            try:
                return parse_quantity(tok.text)
            except UnitError as exc:
                self.error(str(exc), tok)
        if tok.kind == "ident":
            if tok.text not in self.variables:
                self.error(f"undeclared variable {tok.text!r}", tok)
            return tok.text
        self.error(f"expected a value, found {tok.text!r}", tok)

    def window(self) -> Tuple[Expr, Expr, bool]:
        a = self.value()
        self.expect("dots")
        b = self.value()
        tagged = False
        if self.peek().kind == "ident" and self.peek().text == "tagged":
            self.next()
            tagged = True
        return a, b, tagged

    def statement(self) -> Optional[Statement]:
        tok = self.next()
        if tok.kind != "ident":
            self.error(f"expected a statement, found {tok.text!r}", tok)
        kw = tok.text
        if kw == "seq":
            self.name = self.expect("ident").text
            self.end_statement()
            return None
        if kw == "var":
            name = self.expect("ident").text
            if name in self.variables:
                self.error(f"variable {name!r} already declared", tok)
            default = None
            if self.peek().kind == "punct" and self.peek().text == "=":
                self.next()
                v = self.value()
                if isinstance(v, str):
                    self.error("variable default must be a literal", tok)
                default = v
            self.variables[name] = default
            self.end_statement()
            return None
        if kw == "laser":
            duration = self.value()
            power: Expr = None
            readout = None
            while self.peek().kind == "ident":
                attr = self.next().text
                if attr == "power":
                    power = self.value()
                elif attr == "readout":
                    a, b, tagged = self.window()
                    readout = Window(a, b, tagged)
                else:
                    self.error(f"unknown laser attribute {attr!r}")
            self.end_statement()
            if power is None:
                return LaserStmt(duration=duration, readout=readout)
            return LaserStmt(duration=duration, power=power, readout=readout)
        if kw == "mw":
            duration = self.value()
            freq = amp = None
            phase: Expr = 0.0
            target = AUTO_TARGET
            while self.peek().kind == "ident":
                attr = self.next().text
                if attr == "freq":
                    freq = self.value()
                elif attr == "amp":
                    amp = self.value()
                elif attr == "phase":
                    phase = self.value()
                elif attr == "target":
                    t = self.expect("ident").text
                    if t not in ("plus", "minus"):
                        self.error(f"target must be plus or minus, got {t!r}")
                    target = ZERO_TO_PLUS if t == "plus" else ZERO_TO_MINUS
                else:
                    self.error(f"unknown mw attribute {attr!r}")
            if freq is None or amp is None:
                self.error("mw statement requires freq and amp", tok)
            self.end_statement()
            return MWStmt(duration=duration, frequency=freq, amplitude=amp,
                          phase=phase, target=target)
        if kw == "wait":
            duration = self.value()
            self.end_statement()
            return WaitStmt(duration=duration)
        if kw == "readout":
            a, b, tagged = self.window()
            self.end_statement()
            return ReadoutStmt(Window(a, b, tagged))
        if kw == "repeat":
            count_tok = self.expect("quantity")
            try:
                count = int(count_tok.text)
            except ValueError:
                self.error("repeat count must be an integer", count_tok)
            return RepeatStmt(count=count, body=self.block())
        if kw == "par":
            return ParStmt(body=self.block())
        self.error(f"unknown statement {kw!r}", tok)

    def block(self) -> Tuple[Statement, ...]:
        self.expect("punct", "{")
        stmts = []
        while not (self.peek().kind == "punct" and self.peek().text == "}"):
            if self.peek().kind == "eof":
                self.error("unterminated block")
            s = self.statement()
            if s is not None:
                stmts.append(s)
        self.next()  # consume '}'
        if self.peek().kind == "punct" and self.peek().text == ";":
            self.next()
        return tuple(stmts)

    def parse(self) -> PulseSequence:
        stmts = []
        while self.peek().kind != "eof":
            s = self.statement()
            if s is not None:
                stmts.append(s)
        if not stmts:
            self.error("empty sequence source")
        return PulseSequence(name=self.name, statements=tuple(stmts),
                             variables=self.variables)


def parse_sequence(source: str) -> PulseSequence:
    """Parse `.seq` DSL source into a validated PulseSequence."""
    return _Parser(_lex(source)).parse()
