import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopsched.analysis import (
    INDEPENDENT,
    MAY_DEPEND,
    UNKNOWN,
    VALID,
    YES,
    AffineForm,
    FactSet,
    bounds_infer,
    dependence,
    explain,
    facts_at,
    idempotent,
    normalize,
    prove,
    simplify_index,
)
from loopsched.errors import AnalysisError
from loopsched.ir import Read, lit
from loopsched.parser import parse_expr, parse_proc
from loopsched.printer import print_expr

from analysis_fuzz import check_dependence, check_predicate, evaluate
from conftest import fixture_procs


def box(**sides):
    f = FactSet()
    for v, n in sides.items():
        f = f.add_range(v, lit(0), lit(n))
    return f


def test_affine_forms():
    f = normalize(parse_expr("3 * (i + 2) - i + N"))
    assert f.coeff("i") == 2 and f.coeff("N") == 1 and f.const == 6
    assert f.names() == {"i", "N"}
    g = f.subst({"i": AffineForm.var("k") + AffineForm.constant(1)})
    assert g.coeff("k") == 2 and g.const == 8
    assert normalize(parse_expr("i * j")) is None


def test_floor_and_mod_atoms():
    f = normalize(parse_expr("i % 4 + 4 * (i / 4)"))
    facts = box(i=20)
    assert prove(facts, parse_expr(f"{print_expr(f.to_expr())} == i")) == VALID


@pytest.mark.parametrize(
    "pred, expect",
    [
        ("i < 8", VALID),
        ("i + j <= 14", VALID),
        ("i + j <= 13", UNKNOWN),
        ("2 * i != 7", VALID),
        ("i % 2 == 0 or i % 2 == 1", VALID),
        ("i / 2 <= 3", VALID),
        ("i == j", UNKNOWN),
    ],
)
def test_prove_small(pred, expect):
    assert prove(box(i=8, j=8), parse_expr(pred)) == expect


def test_prove_uses_asserts_and_loops():
    p = parse_proc(
        """
proc f(N: size, x: f32[N]):
  assert N % 8 == 0
  for io in seq(0, N / 8):
    for ii in seq(0, 8):
      x[8 * io + ii] = 1.0
"""
    )
    path = p.find("x[_] = _").path
    facts = facts_at(p, path)
    assert prove(facts, parse_expr("8 * io + ii < N")) == VALID
    assert prove(facts, parse_expr("8 * io + ii < N - 1")) == UNKNOWN


def test_explain_trace():
    res, text = explain(box(i=4), parse_expr("i < 3"))
    assert res == UNKNOWN and "goal" in text and "0 <= i < 4" in text


def test_simplify_index_with_facts():
    p = parse_proc(
        """
proc f(H: size, x: f32[H]):
  assert H % 32 == 0
  x[0] = 1.0
"""
    )
    facts = facts_at(p, p.find("x[_] = _").path)
    e = simplify_index(parse_expr("H - 32 * (H / 32) + 34"), facts)
    assert e == lit(34)


def test_bounds_infer_stencil():
    p = fixture_procs("bounds.exo2ir")["stencil"]
    w = bounds_infer(p.find_loop("io"), "arr")
    (lo, hi), = w.dims
    assert lo == AffineForm({"io": 32}, 0)
    assert hi == AffineForm({"io": 32}, 34)
    w2 = bounds_infer(p.find_loop("ii"), "arr")
    assert w2.dims[0][1] - w2.dims[0][0] == AffineForm.constant(3)
    with pytest.raises(AnalysisError):
        bounds_infer(p.find_loop("io"), "nothing")


def test_bounds_infer_matches_enumeration():
    p = fixture_procs("bounds.exo2ir")["stencil"]
    w = bounds_infer(p.find_loop("io"), "arr")
    for io in range(3):
        seen = [32 * io + ii + k for ii in range(32) for k in range(3)]
        lo, hi = (evaluate(f.to_expr(), {"io": io}) for f in w.dims[0])
        assert (lo, hi) == (min(seen), max(seen) + 1)


def test_dependence_and_idempotence():
    p = parse_proc(
        """
proc f(N: size, x: f32[N + 1], y: f32[N]):
  for i in seq(0, N):
    x[i] = 1.0
    y[i] = x[i + 1]
    y[i] += 2.0
"""
    )
    a, b, c = p.body[0].body
    loop = ("i", lit(0), Read("N"))
    assert dependence(a, b, loop=loop) == MAY_DEPEND
    assert dependence(a, c, loop=loop) == INDEPENDENT
    assert idempotent([a]) == YES
    assert idempotent([c]) != YES


@pytest.mark.parametrize("seed", range(0, 1000, 7))
def test_predicate_soundness(seed):
    verdict, unsound = check_predicate(seed)
    assert not unsound


@pytest.mark.parametrize("seed", range(0, 1000, 7))
def test_dependence_soundness(seed):
    verdict, unsound = check_dependence(seed)
    assert not unsound


@settings(max_examples=200, deadline=None)
@given(
    st.integers(-3, 3), st.integers(-3, 3), st.integers(-6, 6),
    st.sampled_from(["<", "<=", "==", ">=", ">"]), st.integers(1, 6), st.integers(1, 6),
)
def test_prove_agrees_with_enumeration(a, b, c, op, n, m):
    pred = parse_expr(f"{a} * i + {b} * j + {c} {op} 0")
    truth = all(evaluate(pred, {"i": i, "j": j}) for i, j in itertools.product(range(n), range(m)))
    verdict = prove(box(i=n, j=m), pred)
    if verdict == VALID:
        assert truth
    # small two-variable boxes are decided exactly
    assert (verdict == VALID) == truth
