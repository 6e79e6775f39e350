import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trstl.errors import FormulaSyntaxError, NegativeInterval, NnfViolation, TrstlError
from trstl.stl_ast import (Always, And, Atom, Eventually, Interval, NegAtom, Or, Until, analyze,
                           format_formula, parse_formula, resolve_horizon, walk)


def test_single_atom():
    assert parse_formula("R1") == Atom("R1")


def test_nested_eventually_always():
    f = parse_formula("F[0,150] G[0,15] R1")
    assert f == Eventually(Interval(0, 150), Always(Interval(0, 15), Atom("R1")))


def test_until_with_negated_left():
    assert parse_formula("(!G1) U[0,30] C1") == Until(Interval(0, 30), NegAtom("G1"), Atom("C1"))


@pytest.mark.parametrize("text", ["!(F[0,1] R1)", "!(A & B)", "!!A"])
def test_negation_only_on_atoms(text):
    with pytest.raises(NnfViolation):
        parse_formula(text)


@pytest.mark.parametrize("text", ["F[3,1] R", "G[-1,2] R"])
def test_bad_intervals(text):
    with pytest.raises((NegativeInterval, FormulaSyntaxError)):
        parse_formula(text)


def test_syntax_error_reports_position():
    with pytest.raises(FormulaSyntaxError) as ei:
        parse_formula("R1 & & R2")
    assert ei.value.position == 5


def test_format_examples():
    assert format_formula(Atom("R1")) == "R1"
    assert format_formula(And([NegAtom("A1"), NegAtom("A2")])) == "(!A1) & (!A2)"
    assert format_formula(Until(Interval(0, 30), NegAtom("G1"), Atom("C1"))) == "(!G1) U[0,30] C1"


def test_precedence_until_over_and_over_or():
    f = parse_formula("A | B & C U[0,1] D")
    assert isinstance(f, Or)
    assert isinstance(f.children[1], And)
    assert isinstance(f.children[1].children[1], Until)


def test_n_ary_flattening():
    assert parse_formula("A & (B & C)") == And([Atom("A"), Atom("B"), Atom("C")])


def test_omitted_interval_resolves_to_horizon():
    f = resolve_horizon(parse_formula("F G[0,2] R"), 20)
    assert f.interval == Interval(0, 20)
    assert f.child.interval == Interval(0, 2)


def test_decimal_bounds_are_exact():
    f = parse_formula("F[0.1,0.3] R")
    assert f.interval.a == Fraction(1, 10) and f.interval.b == Fraction(3, 10)


def test_analyze_counts():
    s = analyze(Atom("R1"))
    assert (s.num_temporal_ops, s.num_atoms, s.single_temporal_op) == (0, 1, False)
    s = analyze(Eventually(Interval(0, 5), Atom("R1")))
    assert (s.num_temporal_ops, s.num_atoms, s.single_temporal_op) == (1, 1, True)


def test_analyze_mission_three():
    # two independent counts: analyze() and a direct tree walk
    f = parse_formula("((!G1) U[0,30] C1) & F[50,80] G[0,5] R1 & F G[0,5] R2")
    walked = sum(isinstance(n, (Always, Eventually, Until)) for n in walk(f))
    assert analyze(f).num_temporal_ops == walked == 5


def test_single_op_top_level_conjunction():
    assert analyze(parse_formula("F[0,5] A & G[1,2] (!B)")).single_temporal_op
    assert not analyze(parse_formula("F[0,5] A & (!C)")).single_temporal_op
    assert not analyze(parse_formula("F[0,5] G[0,1] A")).single_temporal_op


# -- properties --------------------------------------------------------------

names = st.sampled_from(["A", "B1", "R_2", "zone"])
decimals = st.builds(Fraction, st.integers(0, 2000), st.sampled_from([1, 4, 10, 100]))
bounds = st.tuples(decimals, decimals)


def _iv(pair):
    a, b = sorted(pair)
    return Interval(a, b)


formulas = st.recursive(
    st.one_of(names.map(Atom), names.map(NegAtom)),
    lambda inner: st.one_of(
        st.lists(inner, min_size=2, max_size=3).map(And),
        st.lists(inner, min_size=2, max_size=3).map(Or),
        st.tuples(bounds, inner).map(lambda t: Always(_iv(t[0]), t[1])),
        st.tuples(bounds, inner).map(lambda t: Eventually(_iv(t[0]), t[1])),
        st.tuples(bounds, inner, inner).map(lambda t: Until(_iv(t[0]), t[1], t[2])),
    ),
    max_leaves=8,
)


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_round_trip(f):
    assert parse_formula(format_formula(f)) == f


@settings(max_examples=200, deadline=None)
@given(formulas, st.randoms(use_true_random=False))
def test_analyze_ignores_child_order(f, rnd):
    def shuffle(n):
        if isinstance(n, (And, Or)):
            kids = [shuffle(c) for c in n.children]
            rnd.shuffle(kids)
            return type(n)(kids)
        if isinstance(n, (Always, Eventually)):
            return type(n)(n.interval, shuffle(n.child))
        if isinstance(n, Until):
            return Until(n.interval, shuffle(n.left), shuffle(n.right))
        return n
    assert analyze(shuffle(f)) == analyze(f)


@settings(max_examples=500, deadline=None)
@given(formulas, st.integers(0, 10_000), st.sampled_from(["del", "dup", "swap", "ins"]))
def test_mutations_raise_structured_errors_only(f, seed, op):
    text = format_formula(f)
    rng = random.Random(seed)
    k = rng.randrange(len(text))
    junk = rng.choice("()[],!&|UGF 0.5x-")
    if op == "del":
        text = text[:k] + text[k + 1:]
    elif op == "dup":
        text = text[:k] + text[k] + text[k:]
    elif op == "swap" and k + 1 < len(text):
        text = text[:k] + text[k + 1] + text[k] + text[k + 2:]
    else:
        text = text[:k] + junk + text[k:]
    try:
        parse_formula(text)
    except TrstlError:
        pass
