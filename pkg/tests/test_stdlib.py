import re

import pytest

from loopsched.analysis import bounds_infer
from loopsched.errors import InternalError, SchedulingError
from loopsched.interp import check_equiv
from loopsched.ir import Alloc, Call, For, walk_stmts
from loopsched.parser import parse_proc
from loopsched.printer import print_proc
from loopsched.stdlib import (
    bundled_machines,
    cse,
    fission_after,
    fma_rule,
    general_tile2D,
    halide_compute_at,
    halide_store_at,
    hoist_stmt,
    innermost,
    interleave_loop,
    licm,
    lift,
    load_machine,
    lrn,
    optimize_level_1,
    preorder,
    remove_parent_loop,
    reorder_before,
    repeat_op,
    seq_ops,
    tile2D,
    tileND,
    try_else,
    vectorize,
)
from loopsched.primitives import divide_loop

from conftest import GOLDEN, fixture_procs

SAXPY = parse_proc(
    """
proc saxpy(N: size, alpha: f32, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    y[i] += alpha * x[i]
"""
)


def squash(text):
    return re.sub(r"\s+", "", text)


def loop_nest(p):
    out = []
    s = p.body[-1]
    while isinstance(s, For):
        out.append((s.iter, s))
        s = s.body[0]
    return out


# combinators


def test_repeat_stops_at_first_failure():
    calls = []

    def op(p, c):
        calls.append(1)
        if len(calls) > 3:
            raise SchedulingError("done")
        return p, c

    assert repeat_op(op)(SAXPY, None) == (SAXPY, None)
    assert len(calls) == 4


def test_repeat_limit():
    with pytest.raises(SchedulingError):
        repeat_op(lambda p, c: (p, c), limit=5)(SAXPY, None)


def test_try_else_recovers_only_scheduling_errors():
    def bad(p, c):
        raise SchedulingError("no")

    def broken(p, c):
        raise InternalError("bug")

    fallback = lambda p, c: ("else", c)  # noqa: E731
    assert try_else(bad, fallback)(SAXPY, None)[0] == "else"
    with pytest.raises(InternalError):
        try_else(broken, fallback)(SAXPY, None)


def test_seq_and_lift():
    op = seq_ops(lift(lambda p, c: divide_loop(p, c, 2, ["io", "ii"], tail="cut")))
    q, c = op(SAXPY, SAXPY.find_loop("i"))
    assert q.parent is SAXPY and c.node().iter == "i"


def test_traversals():
    p = parse_proc(
        """
proc f(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    for j in seq(0, N):
      x[j] = 1.0
    y[i] = 2.0
"""
    )
    kinds = [type(c.node()).__name__ for c in lrn(p.body_cursor())]
    assert kinds == ["Assign", "For", "Assign", "For"]
    assert [type(c.node()).__name__ for c in preorder(p.body_cursor())] == ["For", "For", "Assign", "Assign"]
    assert [c.node().iter for c in innermost(p.body_cursor())] == ["j"]


# hoisting

HOIST = repeat_op(try_else(seq_ops(fission_after, remove_parent_loop), reorder_before))


@pytest.mark.parametrize("name, depth", [("hoist_free", 0), ("hoist_outer", 1), ("hoist_inner", 2)])
def test_hoist(name, depth):
    p = fixture_procs("hoist.exo2ir")[name]
    s = p.find("s[_] = _")
    q, c = HOIST(p, s)
    assert check_equiv(p, q)
    # number of loops still around the statement
    assert len(q.forward(s).path) - 1 == depth
    assert hoist_stmt(p, "s[_] = _") == q


# tiling


def test_tile2D_golden():
    g = fixture_procs("gemv.exo2ir")["gemv"]
    q = tile2D(g, "i", "j", ["io", "ii"], ["jo", "ji"], 8, 8)
    body = print_proc(q).split("assert N % 8 == 0", 1)[1]
    assert squash(body) == squash((GOLDEN / "gemv_tiled.txt").read_text())
    assert check_equiv(g, q)


def test_tileND_matches_tile2D():
    g = fixture_procs("gemv.exo2ir")["gemv"]
    a = tile2D(g, "i", "j", ["io", "ii"], ["jo", "ji"], 8, 8)
    b = tileND(g, ["i", "j"], [["io", "ii"], ["jo", "ji"]], [8, 8])
    assert a == b


def test_general_tile2D_falls_back():
    p = parse_proc(
        """
proc g(A: f32[10, 10]):
  for i in seq(0, 10):
    for j in seq(0, 10):
      A[i, j] = 1.0
"""
    )
    q = general_tile2D(p, "i", "j", ["io", "ii"], ["jo", "ji"], 4, 4)
    assert [n for n, _ in loop_nest(q)][:2] == ["io", "jo"]
    assert "if" in print_proc(q)
    assert check_equiv(p, q)


# cse / licm


def test_cse_binds_repeats():
    p = parse_proc(
        """
proc f(N: size, a: f32[N], b: f32[N], x: f32[N], y: f32[N]):
  for i in seq(0, N):
    x[i] = a[i] * b[i] + 1.0
    y[i] = a[i] * b[i] - 1.0
"""
    )
    q = cse(p, p.find_loop("i").body())
    assert print_proc(q).count("a[i] * b[i]") == 1
    assert check_equiv(p, q)


def test_licm_hoists_invariant():
    p = parse_proc(
        """
proc f(N: size, c: f32, t: f32[1], x: f32[N]):
  assert N >= 1
  for i in seq(0, N):
    t[0] = c * 2.0
    x[i] = t[0] + x[i]
"""
    )
    q = licm(p, "i")
    assert isinstance(q.body[0], type(p.body[0].body[0]))
    assert check_equiv(p, q)


# vectorization


def _allocs(p):
    return [s for s in walk_stmts(p.body) if isinstance(s, Alloc)]


@pytest.mark.parametrize("n", [8, 24, 37])
def test_vectorize_saxpy(n):
    m = load_machine("v8f32")
    p = SAXPY.partial_eval(N=n)
    plain = vectorize(p, "i", 8, "f32", m.mem_type, m.get_instructions())
    fused = vectorize(p, "i", 8, "f32", m.mem_type, m.get_instructions(), [fma_rule])
    for q in (plain, fused):
        assert check_equiv(p, q)
        main = q.body[0]
        assert all(isinstance(s, (Alloc, Call)) for s in main.body)
        assert (len(q.body) == 2) == (n % 8 != 0)
    assert len(_allocs(fused)) == len(_allocs(plain)) - 1


def test_interleave():
    p = SAXPY.partial_eval(N=16)
    q = interleave_loop(p, "i", 2)
    assert check_equiv(p, q)
    assert len(q.body[0].body) == 2


@pytest.mark.parametrize("machine", ["v8f32", "v8f32p"])
@pytest.mark.parametrize("proc", ["saxpy", "sdot", "sscal"])
def test_optimize_level_1(machine, proc):
    m = load_machine(machine)
    p = fixture_procs("blas1.exo2ir")[proc]
    factors = [1, 2, 4] if proc == "sdot" else [1, 2]
    for f in factors:
        q = optimize_level_1(p, "i", "f32", m, f)
        rep = check_equiv(p, q, trials=10)
        assert rep.equal, rep.summary()


def test_bundled_machines():
    assert bundled_machines() == ["v8f32", "v8f32p"]
    m = load_machine("v8f32p")
    assert m.supports_predication and m.vec_width("f32") == 8
    with pytest.raises(SchedulingError):
        m.vec_width("f64")
    with pytest.raises(FileNotFoundError):
        load_machine("nope")


# halide-style scheduling


def test_compute_at_uses_bounds():
    b = fixture_procs("blur.exo2ir")["blur"]
    win = bounds_infer(b.find_loop("xo"), "blur_x")
    q = halide_compute_at(b, "blur_x", "blur_y", "xo")
    tile = [a for a in _allocs(q) if a.name.startswith("blur_x")]
    assert len(tile) == 1
    extents = [(hi - lo).const for lo, hi in win.dims]
    assert [int(d.val) for d in tile[0].dims] == extents == [34, 32]


def test_compute_at_equivalent_64():
    b = fixture_procs("blur.exo2ir")["blur"].partial_eval(H=64, W=64)
    q = halide_compute_at(b, "blur_x", "blur_y", "xo")
    assert check_equiv(b, q, trials=2)


def test_store_at_only():
    b = fixture_procs("blur.exo2ir")["blur"].partial_eval(H=32, W=32)
    q = halide_store_at(b, "blur_x", "blur_y", "yo")
    assert check_equiv(b, q, trials=2)


def test_compute_at_needs_adjacent_producer():
    p = parse_proc(
        """
proc f(N: size, x: f32[N], y: f32[N], z: f32[N]):
  t: f32[N]
  for i in seq(0, N):
    t[i] = x[i]
  for k in seq(0, N):
    z[k] = 0.0
  for j in seq(0, N):
    y[j] = t[j]
"""
    )
    with pytest.raises(SchedulingError):
        halide_compute_at(p, "t", "y", "j")
