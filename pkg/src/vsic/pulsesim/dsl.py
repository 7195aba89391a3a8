"""Line-oriented pulse-sequence language.

One statement per line, ``#`` starts a comment::

    sweep tau 0us 200us 401
    laser A2 80us with MW3
    mw MW1 pi/2 +x
    wait tau
    mw MW1 pi +x
    wait tau
    mw MW1 pi/2 +x
    readout A2 150ns

Statements::

    laser   CHAN DUR [with MWk ...]   CHAN in A1, A2, OFFRES
    mw      MWk ROT [PHASE]           ROT = pi | pi/2 | <num>deg | DUR
    wait    DUR
    readout CHAN DUR                  CHAN in A1, A2
    sweep   IDENT DUR DUR INT

DUR is ``<num>ns|us|ms`` or a swept identifier. Keywords are case-insensitive
and printed in lower case by :func:`format_sequence`; numbers keep the text
they were written with.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

LASER_CHANNELS = ("A1", "A2", "OFFRES")
READOUT_CHANNELS = ("A1", "A2")
MW_CHANNELS = ("MW1", "MW2", "MW3")
PHASES = {"+x": 0.0, "+y": 90.0, "-x": 180.0, "-y": 270.0}
UNITS_US = {"ns": 1e-3, "us": 1.0, "ms": 1e3}

_NUM = r"[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?|\.[0-9]+(?:[eE][+-]?[0-9]+)?"
_DUR_RE = re.compile(rf"^({_NUM})(ns|us|ms)$")
_DEG_RE = re.compile(rf"^({_NUM})deg$")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        loc = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(loc + message)
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Duration:
    text: str
    unit: str

    @property
    def us(self) -> float:
        return float(self.text) * UNITS_US[self.unit]

    def __str__(self):
        return f"{self.text}{self.unit}"


@dataclass(frozen=True)
class Symbol:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Angle:
    text: str  # "pi", "pi/2" or "<num>deg"

    @property
    def radians(self) -> float:
        if self.text == "pi":
            return math.pi
        if self.text == "pi/2":
            return math.pi / 2
        return math.radians(float(self.text[:-3]))

    def __str__(self):
        return self.text


Time = Union[Duration, Symbol]


@dataclass(frozen=True)
class MwPulse:
    channel: str
    rotation: Union[Angle, Duration, Symbol]
    phase: Optional[str] = None

    @property
    def phase_deg(self) -> float:
        return PHASES[self.phase or "+x"]


@dataclass(frozen=True)
class Wait:
    duration: Time


@dataclass(frozen=True)
class Laser:
    channel: str
    duration: Time
    with_mw: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Readout:
    channel: str
    duration: Time


@dataclass(frozen=True)
class SweepDecl:
    symbol: str
    start: Duration
    stop: Duration
    points: int

    def values_us(self):
        import numpy as np
        return np.linspace(self.start.us, self.stop.us, self.points)


Element = Union[MwPulse, Wait, Laser, Readout]


@dataclass(frozen=True)
class PulseSequence:
    elements: Tuple[Element, ...]
    sweep: Optional[SweepDecl] = None
    source_lines: Tuple[int, ...] = field(default=(), compare=False, repr=False)

    def __len__(self):
        return len(self.elements)

    def symbols(self):
        out = set()
        for el in self.elements:
            for v in _times(el):
                if isinstance(v, Symbol):
                    out.add(v.name)
        return out


def _times(el):
    if isinstance(el, MwPulse):
        return [el.rotation] if not isinstance(el.rotation, Angle) else []
    return [el.duration]


# -- tokenizer / parser ---------------------------------------------------------------

def _tokens(line):
    """(text, column) pairs, 1-based columns, comment stripped."""
    code = line.split("#", 1)[0]
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", code)]


def _duration(tok, lineno, allow_symbol=True, allow_zero=False):
    text, col = tok
    m = _DUR_RE.match(text)
    if m:
        d = Duration(m.group(1), m.group(2))
        if d.us < 0 or (d.us == 0 and not allow_zero):
            raise ParseError(f"duration must be > 0, got {text}", lineno, col)
        return d
    if allow_symbol and _IDENT_RE.match(text) and text.lower() not in ("pi",):
        return Symbol(text)
    raise ParseError(f"malformed duration {text!r}", lineno, col)


def _channel(tok, allowed, lineno, stmt):
    text, col = tok
    ch = text.upper()
    if ch not in LASER_CHANNELS + MW_CHANNELS:
        raise ParseError(f"unknown channel {text}", lineno, col)
    if ch not in allowed:
        raise ParseError(f"channel {ch} not valid for {stmt}", lineno, col)
    return ch


def _expect(toks, n_min, n_max, lineno, stmt):
    """toks includes the keyword; argument counts exclude it."""
    if len(toks) - 1 < n_min:
        end = toks[-1][1] + len(toks[-1][0])
        raise ParseError(f"{stmt}: missing argument", lineno, end)
    if n_max is not None and len(toks) - 1 > n_max:
        extra = toks[n_max + 1]
        raise ParseError(f"{stmt}: unexpected token {extra[0]!r}", lineno, extra[1])


def _rotation(tok, lineno):
    text, col = tok
    low = text.lower()
    if low in ("pi", "pi/2"):
        return Angle(low)
    m = _DEG_RE.match(low)
    if m:
        return Angle(m.group(1) + "deg")
    if _DUR_RE.match(text) or _IDENT_RE.match(text):
        return _duration(tok, lineno)
    raise ParseError(f"malformed rotation {text!r}", lineno, col)


def parse_sequence(text: str) -> PulseSequence:
    """Parse sequence text; raises :class:`ParseError` with line and column."""
    elements = []
    lines = []
    sweep = None
    sweep_loc = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        toks = _tokens(line)
        if not toks:
            continue
        kw, kcol = toks[0][0].lower(), toks[0][1]
        args = toks[1:]
        if kw == "laser":
            _expect(toks, 2, None, lineno, kw)
            ch = _channel(args[0], LASER_CHANNELS, lineno, kw)
            dur = _duration(args[1], lineno)
            mws = ()
            if len(args) > 2:
                if args[2][0].lower() != "with":
                    raise ParseError(f"laser: unexpected token {args[2][0]!r}", lineno, args[2][1])
                if len(args) == 3:
                    raise ParseError("laser: 'with' needs at least one MW channel", lineno, args[2][1])
                mws = tuple(_channel(t, MW_CHANNELS, lineno, "laser with") for t in args[3:])
            elements.append(Laser(ch, dur, mws))
        elif kw == "mw":
            _expect(toks, 2, 3, lineno, kw)
            ch = _channel(args[0], MW_CHANNELS, lineno, kw)
            rot = _rotation(args[1], lineno)
            phase = None
            if len(args) == 3:
                phase = args[2][0].lower()
                if phase not in PHASES:
                    raise ParseError(f"unknown phase {args[2][0]}", lineno, args[2][1])
            elements.append(MwPulse(ch, rot, phase))
        elif kw == "wait":
            _expect(toks, 1, 1, lineno, kw)
            elements.append(Wait(_duration(args[0], lineno)))
        elif kw == "readout":
            _expect(toks, 2, 2, lineno, kw)
            ch = _channel(args[0], READOUT_CHANNELS, lineno, kw)
            elements.append(Readout(ch, _duration(args[1], lineno)))
        elif kw == "sweep":
            _expect(toks, 4, 4, lineno, kw)
            if sweep is not None:
                raise ParseError(f"second sweep (first on line {sweep_loc})", lineno, kcol)
            name, ncol = args[0]
            if not _IDENT_RE.match(name):
                raise ParseError(f"malformed sweep symbol {name!r}", lineno, ncol)
            start = _duration(args[1], lineno, allow_symbol=False, allow_zero=True)
            stop = _duration(args[2], lineno, allow_symbol=False, allow_zero=True)
            ptxt, pcol = args[3]
            if not re.fullmatch(r"[0-9]+", ptxt) or int(ptxt) < 1:
                raise ParseError(f"sweep points must be a positive integer, got {ptxt!r}", lineno, pcol)
            sweep = SweepDecl(name, start, stop, int(ptxt))
            sweep_loc = lineno
            continue
        else:
            raise ParseError(f"unknown statement {toks[0][0]!r}", lineno, kcol)
        lines.append(lineno)
    if not elements:
        raise ParseError("empty sequence", 1, 1)
    seq = PulseSequence(tuple(elements), sweep, tuple(lines))
    for el, ln in zip(seq.elements, seq.source_lines):
        for v in _times(el):
            if isinstance(v, Symbol) and (sweep is None or v.name != sweep.symbol):
                raise ParseError(f"undeclared symbol {v.name}", ln, _column_of(text, ln, v.name))
    return seq


def _column_of(text, lineno, word):
    line = text.splitlines()[lineno - 1]
    m = re.search(rf"(?<![A-Za-z0-9_]){re.escape(word)}(?![A-Za-z0-9_])", line)
    return m.start() + 1 if m else 1


# -- printer ----------------------------------------------------------------------------

def format_element(el: Element) -> str:
    if isinstance(el, Laser):
        s = f"laser {el.channel} {el.duration}"
        return s + (" with " + " ".join(el.with_mw) if el.with_mw else "")
    if isinstance(el, MwPulse):
        return f"mw {el.channel} {el.rotation}" + (f" {el.phase}" if el.phase else "")
    if isinstance(el, Wait):
        return f"wait {el.duration}"
    if isinstance(el, Readout):
        return f"readout {el.channel} {el.duration}"
    raise TypeError(f"not a sequence element: {el!r}")


def format_sequence(seq: PulseSequence) -> str:
    """Canonical text: sweep first, lower-case keywords, single spaces."""
    out = []
    if seq.sweep is not None:
        s = seq.sweep
        out.append(f"sweep {s.symbol} {s.start} {s.stop} {s.points}")
    out += [format_element(el) for el in seq.elements]
    return "\n".join(out) + "\n"


def resolve(seq: PulseSequence, value_us: Optional[float]):
    """Elements with the swept symbol replaced by a duration in us."""
    def sub(v):
        if isinstance(v, Symbol):
            return Duration(repr(float(value_us)), "us")
        return v

    out = []
    for el in seq.elements:
        if isinstance(el, MwPulse):
            out.append(MwPulse(el.channel, sub(el.rotation), el.phase))
        elif isinstance(el, Wait):
            out.append(Wait(sub(el.duration)))
        elif isinstance(el, Laser):
            out.append(Laser(el.channel, sub(el.duration), el.with_mw))
        else:
            out.append(Readout(el.channel, sub(el.duration)))
    return out
