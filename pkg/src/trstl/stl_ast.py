"""STL formulas in negation normal form: data model, text syntax, statistics.

Surface syntax::

    F[0,150] G[0,15] R1
    (!G1) U[0,30] C1 & F G[0,5] R2
    (!A1) & (!A2) | R3

``G``/``F`` are always/eventually, ``U`` is until, ``!`` may only prefix an
atom. ``U`` binds tighter than ``&``, which binds tighter than ``|``. An
omitted interval stands for the whole mission horizon and is filled in by
:func:`resolve_horizon` once the horizon is known.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterator, Optional, Union

from .errors import FormulaSyntaxError, NegativeInterval, NnfViolation, UnresolvedInterval

Number = Union[int, float, str, Fraction, Decimal]


def to_fraction(x: Number) -> Fraction:
    """Exact rational for ``x``; floats go through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def format_number(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d == 1:
        # terminating decimal, print exactly
        text = format(Decimal(x.numerator) / Decimal(x.denominator), "f")
        return text.rstrip("0").rstrip(".") if "." in text else text
    return repr(float(x))


@dataclass(frozen=True)
class Interval:
    """Closed time window ``[a, b]`` with ``0 <= a <= b`` (seconds)."""

    a: Fraction
    b: Fraction

    def __post_init__(self):
        a, b = to_fraction(self.a), to_fraction(self.b)
        if a < 0 or b < a:
            raise NegativeInterval(f"invalid interval [{a}, {b}]: need 0 <= a <= b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __str__(self):
        return f"[{format_number(self.a)},{format_number(self.b)}]"


class Formula:
    """Base class of all formula nodes. Instances are immutable and hashable."""

    __slots__ = ()

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __str__(self):
        return format_formula(self)


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __post_init__(self):
        _check_name(self.name)


@dataclass(frozen=True)
class NegAtom(Formula):
    name: str

    def __post_init__(self):
        _check_name(self.name)


def _flatten(cls, children):
    flat = []
    for c in children:
        if not isinstance(c, Formula):
            raise TypeError(f"not a formula: {c!r}")
        if type(c) is cls:
            flat.extend(c.children)
        else:
            flat.append(c)
    if len(flat) < 2:
        raise ValueError(f"{cls.__name__} needs at least two operands")
    return tuple(flat)


@dataclass(frozen=True)
class And(Formula):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", _flatten(And, self.children))


@dataclass(frozen=True)
class Or(Formula):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", _flatten(Or, self.children))


@dataclass(frozen=True)
class Always(Formula):
    interval: Optional[Interval]
    child: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Optional[Interval]
    child: Formula


@dataclass(frozen=True)
class Until(Formula):
    interval: Optional[Interval]
    left: Formula
    right: Formula


def subformulas(f: Formula) -> tuple[Formula, ...]:
    """Direct children of ``f`` in left-to-right order."""
    if isinstance(f, (And, Or)):
        return f.children
    if isinstance(f, (Always, Eventually)):
        return (f.child,)
    if isinstance(f, Until):
        return (f.left, f.right)
    return ()


TEMPORAL = (Always, Eventually, Until)
LITERAL = (Atom, NegAtom)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
KEYWORDS = frozenset({"G", "F", "U"})


def _check_name(name):
    if not isinstance(name, str) or not _IDENT.match(name) or name in KEYWORDS:
        raise ValueError(f"invalid region name {name!r}")


def walk(f: Formula) -> Iterator[Formula]:
    """Post-order traversal (children before parents), duplicates included."""
    for c in subformulas(f):
        yield from walk(c)
    yield f


def atom_names(f: Formula) -> set[str]:
    return {n.name for n in walk(f) if isinstance(n, LITERAL)}


def resolve_horizon(f: Formula, horizon: Number) -> Formula:
    """Replace every omitted interval by ``[0, horizon]``."""
    full = Interval(0, horizon)

    def go(n):
        if isinstance(n, (And, Or)):
            return type(n)(tuple(go(c) for c in n.children))
        if isinstance(n, (Always, Eventually)):
            return type(n)(n.interval or full, go(n.child))
        if isinstance(n, Until):
            return Until(n.interval or full, go(n.left), go(n.right))
        return n

    return go(f)


def require_resolved(f: Formula) -> None:
    for n in walk(f):
        if isinstance(n, TEMPORAL) and n.interval is None:
            raise UnresolvedInterval(f"operator without interval in {format_formula(f)!r}; "
                                     "call resolve_horizon first")


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>-?(?:\d+(?:\.\d*)?|\.\d+))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>[\[\],()!&|])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str  # 'num', 'ident', 'kw', one of the symbols, or 'eof'
    text: str
    pos: int


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind == "ident" and m.group() in KEYWORDS:
            toks.append(_Tok("kw", m.group(), pos))
        elif kind == "sym":
            toks.append(_Tok(m.group(), m.group(), pos))
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


@dataclass
class _Parser:
    toks: list
    i: int = field(default=0)

    @property
    def tok(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind, *expected):
        if self.tok.kind != kind:
            self.fail(*(expected or (repr(kind),)))
        return self.take()

    def fail(self, *expected):
        t = self.tok
        what = "end of input" if t.kind == "eof" else repr(t.text)
        raise FormulaSyntaxError(f"unexpected {what}", t.pos, expected)

    def formula(self):
        parts = [self.conj()]
        while self.tok.kind == "|":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.until()]
        while self.tok.kind == "&":
            self.take()
            parts.append(self.until())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def until(self):
        left = self.unary()
        if self.tok.kind == "kw" and self.tok.text == "U":
            self.take()
            interval = self.maybe_interval()
            right = self.unary()
            return Until(interval, left, right)
        return left

    def maybe_interval(self):
        if self.tok.kind != "[":
            return None
        self.take()
        start = self.tok.pos
        a = Fraction(self.expect("num", "number").text)
        self.expect(",", "','")
        b = Fraction(self.expect("num", "number").text)
        self.expect("]", "']'")
        if a < 0 or b < a:
            raise NegativeInterval(f"invalid interval [{a}, {b}] at position {start}")
        return Interval(a, b)

    def unary(self):
        t = self.tok
        if t.kind == "!":
            self.take()
            return self.negation(t.pos)
        if t.kind == "kw" and t.text in ("G", "F"):
            self.take()
            interval = self.maybe_interval()
            child = self.unary()
            return (Always if t.text == "G" else Eventually)(interval, child)
        if t.kind == "(":
            self.take()
            inner = self.formula()
            self.expect(")", "')'")
            return inner
        if t.kind == "ident":
            self.take()
            return Atom(t.text)
        self.fail("'!'", "'G'", "'F'", "'('", "identifier")

    def negation(self, bang_pos):
        t = self.tok
        if t.kind == "ident":
            self.take()
            return NegAtom(t.text)
        if t.kind == "(":
            self.take()
            inner = self.formula()
            self.expect(")", "')'")
            if isinstance(inner, Atom):
                return NegAtom(inner.name)
            raise NnfViolation("negation may only be applied to an atom", bang_pos)
        if t.kind in ("!", "kw"):
            raise NnfViolation("negation may only be applied to an atom", bang_pos)
        self.fail("identifier")


def parse_formula(text: str) -> Formula:
    """Parse formula text into an AST.

    Raises :class:`FormulaSyntaxError` (with position and expected tokens),
    :class:`NnfViolation` when ``!`` is applied to a non-atom, and
    :class:`NegativeInterval` for intervals with ``a < 0`` or ``b < a``.
    """
    p = _Parser(_tokenize(text))
    f = p.formula()
    if p.tok.kind != "eof":
        p.fail("'&'", "'|'", "'U'", "end of input")
    return f


# --------------------------------------------------------------------------
# formatting

def _interval_text(iv):
    return "" if iv is None else str(iv)


def _operand(f, allow):
    text = format_formula(f)
    return text if isinstance(f, allow) else f"({text})"


def format_formula(f: Formula) -> str:
    """Inverse of :func:`parse_formula` up to whitespace and parentheses."""
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, NegAtom):
        return f"!{f.name}"
    if isinstance(f, (And, Or)):
        sep = " & " if isinstance(f, And) else " | "
        return sep.join(_operand(c, (Atom, Always, Eventually)) for c in f.children)
    if isinstance(f, (Always, Eventually)):
        op = "G" if isinstance(f, Always) else "F"
        child = _operand(f.child, (Atom, NegAtom, Always, Eventually))
        return f"{op}{_interval_text(f.interval)} {child}"
    if isinstance(f, Until):
        left = _operand(f.left, (Atom,))
        right = _operand(f.right, (Atom,))
        return f"{left} U{_interval_text(f.interval)} {right}"
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# statistics

@dataclass(frozen=True)
class FormulaStats:
    num_temporal_ops: int
    num_atoms: int
    max_nesting: int
    single_temporal_op: bool


def _temporal_depth(f):
    below = max((_temporal_depth(c) for c in subformulas(f)), default=0)
    return below + (1 if isinstance(f, TEMPORAL) else 0)


def _is_single_op(f):
    return isinstance(f, TEMPORAL) and all(isinstance(c, LITERAL) for c in subformulas(f))


def analyze(f: Formula) -> FormulaStats:
    """Operator count ``|phi|``, distinct literal count, temporal nesting depth.

    ``single_temporal_op`` holds for one temporal operator applied directly to
    literals, and for a top-level conjunction/disjunction made only of such
    subformulas.
    """
    nodes = list(walk(f))
    n_temporal = sum(isinstance(n, TEMPORAL) for n in nodes)
    literals = {(type(n), n.name) for n in nodes if isinstance(n, LITERAL)}
    if isinstance(f, (And, Or)):
        single = all(_is_single_op(c) for c in f.children)
    else:
        single = _is_single_op(f)
    return FormulaStats(
        num_temporal_ops=n_temporal,
        num_atoms=len(literals),
        max_nesting=_temporal_depth(f),
        single_temporal_op=single,
    )
