import dataclasses
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopsched.errors import ParseError, WellFormednessError
from loopsched.ir import Assign, BinOp, Const, For, Read, USub, lit
from loopsched.parser import parse_expr, parse_proc, parse_procs
from loopsched.printer import print_expr, print_procs

from conftest import FIXTURES

MACHINES = Path(__import__("loopsched").__file__).parent / "machines"
CORPUS = sorted(FIXTURES.glob("*.exo2ir")) + sorted(MACHINES.glob("*.exo2ir"))


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.name)
def test_print_parse_fixpoint(path):
    procs = parse_procs(path.read_text())
    text = print_procs(procs)
    again = parse_procs(text)
    assert again == procs
    assert print_procs(again) == text


def test_parse_shape():
    p = parse_proc(
        """
proc f(N: size, x: f32[N] @DRAM):
  assert N % 4 == 0
  for i in seq(0, N):
    x[i] = 2.0 * x[i]
"""
    )
    assert p.name == "f"
    assert [a.name for a in p.args] == ["N", "x"]
    assert p.args[0].is_size and p.args[1].is_numeric
    loop = p.body[0]
    assert isinstance(loop, For) and loop.iter == "i"
    assert loop.body[0] == Assign("x", (Read("i"),), BinOp("*", Const(2, True), Read("x", (Read("i"),))))


def test_nodes_are_immutable():
    e = BinOp("+", lit(1), lit(2))
    with pytest.raises(dataclasses.FrozenInstanceError):
        e.op = "-"


def test_equality_ignores_provenance():
    src = "proc f(x: f32[4]):\n  x[0] = 1.0\n"
    a, b = parse_proc(src), parse_proc(src)
    assert a == b and hash(a) == hash(b)
    assert a.version != b.version


def test_parse_error_location():
    with pytest.raises(ParseError) as ei:
        parse_proc("proc f(x: f32[4]):\n  x[0] = = 1.0\n")
    assert ei.value.line == 2


def test_unbound_name_rejected():
    with pytest.raises(WellFormednessError):
        parse_proc("proc f(x: f32[4]):\n  x[0] = y[0]\n")


def test_constants_are_exact():
    e = parse_expr("0.1")
    assert e == Const(Fraction(1, 10), True)
    assert print_expr(e) == "0.1"


# hypothesis: printing then parsing gives the same tree back

NAMES = st.sampled_from(["a", "b", "N", "i"])


def _consts():
    ints = st.integers(-20, 20).map(lambda v: Const(Fraction(v)))
    reals = st.integers(-80, 80).map(lambda v: Const(Fraction(v, 4), True))
    return ints | reals


def _exprs():
    leaves = _consts() | NAMES.map(Read)
    return st.recursive(
        leaves,
        lambda inner: st.builds(BinOp, st.sampled_from(["+", "-", "*", "/"]), inner, inner)
        | inner.filter(lambda e: not isinstance(e, Const)).map(USub)
        | st.tuples(NAMES, st.lists(inner, min_size=1, max_size=2)).map(lambda t: Read("x" + t[0], tuple(t[1]))),
        max_leaves=12,
    )


@settings(max_examples=300, deadline=None)
@given(_exprs())
def test_expr_round_trip(e):
    text = print_expr(e)
    assert parse_expr(text) == e
