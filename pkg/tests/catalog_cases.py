"""Fixtures for the primitive safety suite.

CASES maps each catalog primitive to a pair of lists.  A positive case is
(source, action) and must yield an equivalent procedure; a negative case is
(source, action) whose action must raise SchedulingError.  Sources hold one
or more procedures; actions receive the last one plus a name->proc dict.
"""

from loopsched.primitives import (
    add_loop,
    bind_expr,
    call_eqv,
    commute_expr,
    cut_loop,
    delete_buffer,
    divide_dim,
    divide_loop,
    divide_with_recompute,
    eliminate_dead_code,
    expand_dim,
    extract_subproc,
    fission,
    fuse,
    inline,
    inline_assign,
    join_loops,
    lift_alloc,
    lift_scope,
    merge_writes,
    mult_dim,
    mult_loops,
    parallelize_loop,
    rearrange_dim,
    remove_loop,
    reorder_loops,
    reorder_stmts,
    replace,
    resize_dim,
    reuse_buffer,
    rewrite_expr,
    set_memory,
    set_precision,
    shift_loop,
    simplify,
    sink_alloc,
    specialize,
    stage_mem,
    unroll_buffer,
    unroll_loop,
)

AXPY = """
proc axpy(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    y[i] += 2.0 * x[i]
"""

GEMV = """
proc gemv(M: size, N: size, A: f32[M, N], x: f32[N], y: f32[M]):
  for i in seq(0, M):
    for j in seq(0, N):
      y[i] += A[i, j] * x[j]
"""

GEMV4 = """
proc gemv4(M: size, N: size, A: f32[M, N], x: f32[N], y: f32[M]):
  assert M % 4 == 0
  assert N % 4 == 0
  for i in seq(0, M):
    for j in seq(0, N):
      y[i] += A[i, j] * x[j]
"""

COPY2D = """
proc copy2d(N: size, M: size, a: f32[N, M], b: f32[N, M]):
  for i in seq(0, N):
    for j in seq(0, M):
      b[i, j] = a[i, j] + 1.0
"""

TWO = """
proc two(N: size, x: f32[N], y: f32[N], z: f32[N]):
  for i in seq(0, N):
    x[i] = y[i] * 2.0
    z[i] = x[i] + y[i]
"""

TEMP = """
proc temp(N: size, x: f32[N], y: f32[N]):
  assert N % 4 == 0
  for i in seq(0, N):
    t: f32[4]
    t[0] = x[i]
    t[1] = t[0] * 2.0
    y[i] = t[1] + t[0]
"""

SCALAR = """
proc scal(x: f32[4], y: f32[4]):
  t: f32
  t = x[0] * 3.0
  y[0] = t + x[1]
  y[1] = t
"""

VADD = """
@instr("vadd({dst_data}, {a_data}, {b_data});")
proc vadd4(dst: f32[4], a: f32[4], b: f32[4]):
  for k in seq(0, 4):
    dst[k] = a[k] + b[k]
"""

VADD_CALLER = VADD + """
proc add(N: size, x: f32[N], y: f32[N], z: f32[N]):
  assert N % 4 == 0
  for io in seq(0, N / 4):
    for ii in seq(0, 4):
      z[4 * io + ii] = x[4 * io + ii] + y[4 * io + ii]
"""

SUB = """
proc scale(n: size, v: f32[n]):
  for k in seq(0, n):
    v[k] = v[k] * 2.0

proc caller(N: size, x: f32[N, 3]):
  for i in seq(0, N):
    scale(3, x[i, 0:3])
"""


def _dwr_const(n, c, hi=10):
    return f"""
proc dwr(a: f32[{hi}], b: f32[{hi}]):
  for i in seq(0, {hi}):
    b[i] = a[i] + 1.0
""", (lambda p, q: divide_with_recompute(p, "i", str(n), c, ["io", "ii"]))


CASES = {}


def case(name, pos, neg):
    CASES[name] = (pos, neg)


# --------------------------------------------------------------------------
# loops

case(
    "divide_loop",
    [
        (AXPY, lambda p, q: divide_loop(p, "i", 4, ["io", "ii"], tail="guard")),
        (AXPY, lambda p, q: divide_loop(p, "i", 3, ["io", "ii"], tail="cut")),
        (GEMV, lambda p, q: divide_loop(p, "j", 2, ["jo", "ji"], tail="cut_and_guard")),
        (GEMV4, lambda p, q: divide_loop(p, "i", 4, ["io", "ii"], perfect=True)),
    ],
    [
        (AXPY, lambda p, q: divide_loop(p, "i", 4, ["io", "ii"], perfect=True)),
        (AXPY, lambda p, q: divide_loop(p, "i", 0, ["io", "ii"])),
        (AXPY, lambda p, q: divide_loop(p, "i", 4, ["x", "ii"])),
    ],
)

DWR = """
proc dwr(N: size, a: f32[4 * N + 2], b: f32[4 * N + 2]):
  assert N >= 1
  for i in seq(0, 4 * N + 2):
    b[i] = a[i] * 2.0
"""

DWR_2D = """
proc dwr2(N: size, a: f32[10, N], b: f32[10, N]):
  for i in seq(0, 10):
    for j in seq(0, N):
      b[i, j] = a[i, j] - 1.0
"""

case(
    "divide_with_recompute",
    [
        (DWR, lambda p, q: divide_with_recompute(p, "i", "N", 4, ["io", "ii"])),
        _dwr_const(2, 4),
        (DWR_2D, lambda p, q: divide_with_recompute(p, "i", "3", 3, ["io", "ii"])),
    ],
    [
        ("""
proc acc(a: f32[10], b: f32[1]):
  for i in seq(0, 10):
    b[0] += a[i]
""", lambda p, q: divide_with_recompute(p, "i", "2", 4, ["io", "ii"])),
        _dwr_const(3, 4),
        (DWR, lambda p, q: divide_with_recompute(p, "i", "N + 1", 4, ["io", "ii"])),
    ],
)

case(
    "mult_loops",
    [
        ("""
proc m(N: size, x: f32[N, 4], y: f32[N, 4]):
  for i in seq(0, N):
    for j in seq(0, 4):
      x[i, j] = y[i, j] * 2.0
""", lambda p, q: mult_loops(p, "i", "k")),
        ("""
proc m3(x: f32[3, 5]):
  for i in seq(0, 3):
    for j in seq(0, 5):
      x[i, j] = x[i, j] + 1.0
""", lambda p, q: mult_loops(p, "i", "k")),
        ("""
proc m2(N: size, x: f32[N, 2, N]):
  for i in seq(0, N):
    for j in seq(0, 2):
      for k in seq(0, N):
        x[i, j, k] = 0.5
""", lambda p, q: mult_loops(p, "i", "ij")),
    ],
    [
        ("""
proc m(N: size, x: f32[4, N]):
  for i in seq(0, 4):
    for j in seq(0, N):
      x[i, j] = 1.0
""", lambda p, q: mult_loops(p, "i", "k")),
        ("""
proc m(N: size, x: f32[N, 4], y: f32[N]):
  for i in seq(0, N):
    y[i] = 0.0
    for j in seq(0, 4):
      x[i, j] = 1.0
""", lambda p, q: mult_loops(p, "i", "k")),
    ],
)

CUT_FROM_2 = """
proc c2(N: size, x: f32[N + 2]):
  for i in seq(2, N + 2):
    x[i] = x[i] * 3.0
"""

case(
    "cut_loop",
    [
        (AXPY, lambda p, q: cut_loop(p, "i", "N / 2")),
        (AXPY, lambda p, q: cut_loop(p, "i", "0")),
        (CUT_FROM_2, lambda p, q: cut_loop(p, "i", "N + 2")),
    ],
    [
        (AXPY, lambda p, q: cut_loop(p, "i", "N + 1")),
        (CUT_FROM_2, lambda p, q: cut_loop(p, "i", "1")),
    ],
)

case(
    "join_loops",
    [
        ("""
proc j(N: size, x: f32[N]):
  assert N >= 3
  for i in seq(0, 3):
    x[i] = x[i] + 1.0
  for i in seq(3, N):
    x[i] = x[i] + 1.0
""", lambda p, q: join_loops(p, p.find_loop("i"), p.find_loop("i #1"))),
        ("""
proc j2(N: size, x: f32[2 * N], y: f32[2 * N]):
  for i in seq(0, N):
    y[i] = x[i]
  for i in seq(N, 2 * N):
    y[i] = x[i]
""", lambda p, q: join_loops(p, p.find_loop("i"), p.find_loop("i #1"))),
        ("""
proc j3(x: f32[8], s: f32[1]):
  for a in seq(0, 4):
    s[0] += x[a]
  for b in seq(4, 8):
    s[0] += x[b]
""", lambda p, q: join_loops(p, p.find_loop("a"), p.find_loop("b"))),
    ],
    [
        ("""
proc j(x: f32[8]):
  for i in seq(0, 4):
    x[i] = x[i] + 1.0
  for i in seq(4, 8):
    x[i] = x[i] + 2.0
""", lambda p, q: join_loops(p, p.find_loop("i"), p.find_loop("i #1"))),
        ("""
proc j(x: f32[8]):
  for i in seq(0, 3):
    x[i] = 1.0
  for i in seq(4, 8):
    x[i] = 1.0
""", lambda p, q: join_loops(p, p.find_loop("i"), p.find_loop("i #1"))),
    ],
)

case(
    "shift_loop",
    [
        (AXPY, lambda p, q: shift_loop(p, "i", "2")),
        (AXPY, lambda p, q: shift_loop(p, "i", "N")),
        (COPY2D, lambda p, q: shift_loop(p, "j", "i + 1")),
    ],
    [
        (AXPY, lambda p, q: shift_loop(p, "i", "0 - 1")),
        (AXPY, lambda p, q: shift_loop(p, "i", "N - 5")),
    ],
)

case(
    "fission",
    [
        (TWO, lambda p, q: fission(p, p.find("z[_] = _").before())),
        ("""
proc g(M: size, N: size, A: f32[M, N], x: f32[N], y: f32[M]):
  for i in seq(0, M):
    y[i] = 0.0
    for j in seq(0, N):
      y[i] += A[i, j] * x[j]
""", lambda p, q: fission(p, p.find("y[_] = _").after())),
        ("""
proc g2(N: size, M: size, a: f32[N, M], b: f32[N, M]):
  for i in seq(0, N):
    for j in seq(0, M):
      a[i, j] = 1.0
      b[i, j] = 2.0
""", lambda p, q: fission(p, p.find("a[_] = _").after(), n_lifts=2)),
    ],
    [
        ("""
proc g(N: size, x: f32[N + 1], y: f32[N]):
  for i in seq(0, N):
    x[i] = 1.0
    y[i] = x[i + 1]
""", lambda p, q: fission(p, p.find("y[_] = _").before())),
        ("""
proc g(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    t: f32
    t = x[i]
    y[i] = t
""", lambda p, q: fission(p, p.find("t = _").after())),
    ],
)

case(
    "fuse",
    [
        (
            """
proc f(N: size, x: f32[N], y: f32[N], z: f32[N]):
  for i in seq(0, N):
    x[i] = y[i] * 2.0
  for i in seq(0, N):
    z[i] = x[i] + y[i]
""",
            lambda p, q: fuse(p, p.find_loop("i"), p.find_loop("i #1")),
        ),
        (
            """
proc f(N: size, x: f32[4], y: f32[4]):
  if N > 2:
    x[0] = 1.0
  if N > 2:
    y[0] = x[0]
""",
            lambda p, q: fuse(p, p.find("if _: _"), p.find("if _: _ #1")),
        ),
        (
            """
proc f(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    x[i] = 0.0
  for k in seq(0, N):
    y[k] += x[k] * 2.0
""",
            lambda p, q: fuse(p, p.find_loop("i"), p.find_loop("k")),
        ),
    ],
    [
        (
            """
proc f(N: size, a: f32[N], x: f32[N + 1], y: f32[N]):
  for i in seq(0, N):
    x[i] = a[i]
  for i in seq(0, N):
    y[i] = x[i + 1]
""",
            lambda p, q: fuse(p, p.find_loop("i"), p.find_loop("i #1")),
        ),
        (
            """
proc f(N: size, M: size, x: f32[N], y: f32[M]):
  for i in seq(0, N):
    x[i] = 1.0
  for i in seq(0, M):
    y[i] = 1.0
""",
            lambda p, q: fuse(p, p.find_loop("i"), p.find_loop("i #1")),
        ),
    ],
)

case(
    "reorder_loops",
    [
        (GEMV, lambda p, q: reorder_loops(p, "i")),
        (COPY2D, lambda p, q: reorder_loops(p, "i j")),
        ("""
proc s(N: size, M: size, a: f32[N, M], r: f32[1]):
  for i in seq(0, N):
    for j in seq(0, M):
      r[0] += a[i, j]
""", lambda p, q: reorder_loops(p, "i")),
    ],
    [
        ("""
proc w(N: size, a: f32[N, N]):
  for i in seq(1, N):
    for j in seq(0, N - 1):
      a[i, j] = a[i - 1, j + 1]
""", lambda p, q: reorder_loops(p, "i")),
        ("""
proc t(N: size, a: f32[N, N]):
  for i in seq(0, N):
    for j in seq(0, i):
      a[i, j] = 1.0
""", lambda p, q: reorder_loops(p, "i")),
    ],
)

case(
    "lift_scope",
    [
        (GEMV, lambda p, q: lift_scope(p, "j")),
        ("""
proc l(N: size, x: f32[N]):
  for i in seq(0, N):
    if N > 3:
      x[i] = 1.0
    else:
      x[i] = 2.0
""", lambda p, q: lift_scope(p, p.find("if _: _"))),
        ("""
proc l(N: size, x: f32[N]):
  if N > 3:
    for i in seq(0, N):
      x[i] = 1.0
""", lambda p, q: lift_scope(p, "i")),
    ],
    [
        ("""
proc l(N: size, x: f32[N]):
  for i in seq(0, N):
    if i > 2:
      x[i] = 1.0
""", lambda p, q: lift_scope(p, p.find("if _: _"))),
        ("""
proc l(N: size, x: f32[N]):
  if N > 3:
    for i in seq(0, N):
      x[i] = 1.0
  else:
    x[0] = 2.0
""", lambda p, q: lift_scope(p, "i")),
        ("""
proc t(N: size, a: f32[N, N]):
  for i in seq(0, N):
    for j in seq(0, i):
      a[i, j] = 1.0
""", lambda p, q: lift_scope(p, "j")),
    ],
)

case(
    "remove_loop",
    [
        ("""
proc r(N: size, x: f32[4]):
  assert N >= 1
  for i in seq(0, N):
    x[0] = 0.0
""", lambda p, q: remove_loop(p, "i")),
        ("""
proc r(N: size, x: f32[4], y: f32[4]):
  assert N >= 1
  for i in seq(0, N):
    x[0] = y[0] * 2.0
""", lambda p, q: remove_loop(p, "i")),
        ("""
proc r(x: f32[4], y: f32[4]):
  for i in seq(0, 3):
    for j in seq(0, 4):
      x[j] = y[j] + 5.0
""", lambda p, q: remove_loop(p, "i")),
    ],
    [
        ("""
proc r(N: size, x: f32[N]):
  assert N >= 1
  for i in seq(0, N):
    x[i] = 0.0
""", lambda p, q: remove_loop(p, "i")),
        ("""
proc r(N: size, x: f32[4]):
  for i in seq(0, N):
    x[0] = 0.0
""", lambda p, q: remove_loop(p, "i")),
        ("""
proc r(N: size, x: f32[4], y: f32[4]):
  assert N >= 1
  for i in seq(0, N):
    x[0] += y[0]
""", lambda p, q: remove_loop(p, "i")),
    ],
)

IDEM = """
proc a(N: size, x: f32[4], y: f32[4]):
  x[0] = y[0] * 2.0
  y[1] = x[0]
"""

case(
    "add_loop",
    [
        (IDEM, lambda p, q: add_loop(p, p.find("x[_] = _"), "r", "3")),
        (IDEM, lambda p, q: add_loop(p, p.find("x[_] = _"), "r", "3", guard=True)),
        ("""
proc a(N: size, x: f32[4], y: f32[4]):
  assert N >= 1
  x[0] = y[0] * 2.0
""", lambda p, q: add_loop(p, p.find("x[_] = _"), "r", "N")),
    ],
    [
        ("""
proc a(x: f32[4], y: f32[4]):
  x[0] += y[0]
""", lambda p, q: add_loop(p, p.find("x[_] += _"), "r", "3")),
        (IDEM, lambda p, q: add_loop(p, p.find("x[_] = _"), "r", "N")),
        (IDEM, lambda p, q: add_loop(p, p.find("y[_] = _").expand(1, 0), "r", "2")),
    ],
)

case(
    "unroll_loop",
    [
        ("""
proc u(x: f32[4], y: f32[4]):
  for i in seq(0, 4):
    t: f32
    t = y[i]
    x[i] = t * t
""", lambda p, q: unroll_loop(p, "i")),
        (COPY2D.replace("seq(0, M)", "seq(0, 3)").replace("M: size, ", "").replace("N, M]", "N, 3]"),
         lambda p, q: unroll_loop(p, "j")),
        ("""
proc u(x: f32[8]):
  for i in seq(2, 5):
    x[i] = x[i - 1] + 1.0
""", lambda p, q: unroll_loop(p, "i")),
    ],
    [
        (AXPY, lambda p, q: unroll_loop(p, "i")),
        ("""
proc u(x: f32[8]):
  for i in seq(3, 3):
    x[i] = 1.0
""", lambda p, q: unroll_loop(p, "i")),
    ],
)

case(
    "parallelize_loop",
    [
        (AXPY, lambda p, q: parallelize_loop(p, "i")),
        (COPY2D, lambda p, q: parallelize_loop(p, "i")),
        (GEMV, lambda p, q: parallelize_loop(p, "i")),
    ],
    [
        (GEMV, lambda p, q: parallelize_loop(p, "j")),
        ("""
proc pre(N: size, x: f32[N]):
  for i in seq(1, N):
    x[i] = x[i - 1] + 1.0
""", lambda p, q: parallelize_loop(p, "i")),
    ],
)

# --------------------------------------------------------------------------
# statements and expressions

STMTS = """
proc st(x: f32[4], y: f32[4], z: f32[4]):
  x[0] = z[0] + 1.0
  y[0] = z[0] * 2.0
  x[1] = y[1]
"""

case(
    "reorder_stmts",
    [
        (STMTS, lambda p, q: reorder_stmts(p, p.find("x[_] = _").expand(0, 1))),
        (STMTS, lambda p, q: reorder_stmts(p, p.find("y[_] = _"), p.find("x[_] = _ #1"))),
        (TWO.replace("x[i] + y[i]", "y[i] + 1.0"),
         lambda p, q: reorder_stmts(p, p.find("x[_] = _"), p.find("z[_] = _"))),
    ],
    [
        (TWO, lambda p, q: reorder_stmts(p, p.find("x[_] = _"), p.find("z[_] = _"))),
        ("""
proc ww(x: f32[4]):
  x[0] = 1.0
  x[0] = 2.0
""", lambda p, q: reorder_stmts(p, p.find("x[_] = 1.0").expand(0, 1))),
    ],
)

case(
    "commute_expr",
    [
        (TWO, lambda p, q: commute_expr(p, [p.find("x[_] + y[_]")])),
        (TWO, lambda p, q: commute_expr(p, [p.find("y[_] * 2.0")])),
        (AXPY, lambda p, q: commute_expr(p, p.find("2.0 * x[_]"))),
    ],
    [
        ("""
proc c(x: f32[4], y: f32[4]):
  x[0] = x[1] - y[0]
""", lambda p, q: commute_expr(p, [p.find("x[_] - y[_]")])),
        ("""
proc c(x: f32[4], y: f32[4]):
  x[0] = x[1] / y[0]
""", lambda p, q: commute_expr(p, [p.find("x[_] / y[_]")])),
    ],
)

case(
    "specialize",
    [
        (TWO, lambda p, q: specialize(p, p.find("x[_] = _"), ["N == 4", "i < 2"])),
        (AXPY, lambda p, q: specialize(p, "i", ["N % 2 == 0"])),
        (GEMV, lambda p, q: specialize(p, "j", ["M > 3", "N > 1"])),
    ],
    [
        (AXPY, lambda p, q: specialize(p, "i", ["q > 2"])),
        (AXPY, lambda p, q: specialize(p, "i", ["N + 1"])),
        (AXPY, lambda p, q: specialize(p, "i", [])),
    ],
)

case(
    "simplify",
    [
        ("""
proc s(N: size, x: f32[N + 4]):
  for i in seq(0, N):
    x[i + 2 - 2] = 1.0 * x[(i + 4) - 4] + 0.0
""", lambda p, q: simplify(p)),
        ("""
proc s(N: size, x: f32[N]):
  assert N % 4 == 0
  for i in seq(0, N / 4):
    for j in seq(0, 4):
      x[4 * i + j - (N - N)] = 2.0 * 3.0
""", lambda p, q: simplify(p)),
        ("""
proc s(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    x[i] = (1.0 + 1.0) * y[i + 0]
  y[0] = 0.0 + 4.0
""", lambda p, q: simplify(p, "i")),
    ],
    [
        (TWO, lambda p, q: simplify(p, p.find("x[_] + y[_]"))),
        (TWO, lambda p, q: simplify(p, p.find("x[_] = _").after())),
    ],
)

case(
    "eliminate_dead_code",
    [
        ("""
proc d(N: size, x: f32[N]):
  for i in seq(N, N):
    x[i] = 1.0
  x[0] = 2.0
""", lambda p, q: eliminate_dead_code(p, "i")),
        ("""
proc d(N: size, x: f32[4]):
  assert N >= 2
  if N > 1:
    x[0] = 1.0
  else:
    x[0] = 2.0
""", lambda p, q: eliminate_dead_code(p, p.find("if _: _"))),
        ("""
proc d(N: size, x: f32[4]):
  for i in seq(0, 4):
    if i + N < 0:
      x[i] = 1.0
    else:
      x[i] = 3.0
""", lambda p, q: eliminate_dead_code(p, p.find("if _: _"))),
    ],
    [
        (AXPY, lambda p, q: eliminate_dead_code(p, "i")),
        ("""
proc d(N: size, x: f32[4]):
  if N > 3:
    x[0] = 1.0
""", lambda p, q: eliminate_dead_code(p, p.find("if _: _"))),
    ],
)

case(
    "rewrite_expr",
    [
        ("""
proc r(N: size, x: f32[N]):
  for i in seq(0, N):
    x[N - N + i] = 1.0
""", lambda p, q: rewrite_expr(p, p.find("N - N + i"), "i")),
        ("""
proc r(N: size, x: f32[8]):
  assert N == 4
  x[N] = 1.0
""", lambda p, q: rewrite_expr(p, p.find("x[_] = _").child("idx", 0), "4")),
        ("""
proc r(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    y[i] = 2.0 * x[i]
""", lambda p, q: rewrite_expr(p, p.find("2.0 * x[_]"), "x[i] * 2.0")),
    ],
    [
        ("""
proc r(N: size, x: f32[N + 1]):
  for i in seq(0, N):
    x[i] = 1.0
""", lambda p, q: rewrite_expr(p, p.find("x[_] = _").child("idx", 0), "i + 1")),
        ("""
proc r(N: size, x: f32[8]):
  assert N <= 4
  x[N] = 1.0
""", lambda p, q: rewrite_expr(p, p.find("x[_] = _").child("idx", 0), "4")),
    ],
)

case(
    "merge_writes",
    [
        ("""
proc m(x: f32[4], y: f32[4]):
  x[0] = y[0]
  x[0] = y[1]
""", lambda p, q: merge_writes(p, p.find("x[_] = _").expand(0, 1))),
        ("""
proc m(x: f32[4], y: f32[4]):
  x[0] = y[0]
  x[0] += y[1]
""", lambda p, q: merge_writes(p, p.find("x[_] = _").expand(0, 1))),
        ("""
proc m(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    x[i] += y[i]
    x[i] += 2.0
""", lambda p, q: merge_writes(p, p.find("x[_] += _").expand(0, 1))),
    ],
    [
        ("""
proc m(x: f32[4], y: f32[4]):
  x[0] = y[0]
  x[1] = y[1]
""", lambda p, q: merge_writes(p, p.find("x[_] = _").expand(0, 1))),
        ("""
proc m(x: f32[4], y: f32[4]):
  x[0] = y[0]
  x[0] = x[0] * 2.0
""", lambda p, q: merge_writes(p, p.find("x[_] = _").expand(0, 1))),
    ],
)

case(
    "inline_assign",
    [
        (SCALAR, lambda p, q: inline_assign(p, p.find("t = _"))),
        ("""
proc ia(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    t: f32
    t = x[i] + 1.0
    y[i] = t * t
""", lambda p, q: inline_assign(p, p.find("t = _"))),
        ("""
proc ia(N: size, x: f32[N], y: f32[N]):
  t: f32
  t = 2.0
  for i in seq(0, N):
    y[i] = x[i] * t
""", lambda p, q: inline_assign(p, p.find("t = _"))),
    ],
    [
        ("""
proc ia(x: f32[4], y: f32[4]):
  t: f32
  t = x[0]
  t = 3.0
  y[0] = t
""", lambda p, q: inline_assign(p, p.find("t = x[_]"))),
        ("""
proc ia(x: f32[4], y: f32[4]):
  t: f32
  t = x[0]
  x[0] = 5.0
  y[0] = t
""", lambda p, q: inline_assign(p, p.find("t = _"))),
    ],
)

# --------------------------------------------------------------------------
# buffers

LIFTED = """
proc temp(N: size, x: f32[N], y: f32[N]):
  t: f32[4]
  for i in seq(0, N):
    t[0] = x[i]
    y[i] = t[0] * 2.0
"""

case(
    "lift_alloc",
    [
        (TEMP, lambda p, q: lift_alloc(p, "t")),
        ("""
proc la(N: size, M: size, x: f32[N, M], y: f32[N, M]):
  for i in seq(0, N):
    for j in seq(0, M):
      t: f32
      t = x[i, j]
      y[i, j] = t + t
""", lambda p, q: lift_alloc(p, "t", n_lifts=2)),
        ("""
proc la(N: size, x: f32[N], y: f32[N]):
  if N > 2:
    t: f32
    t = x[0]
    y[0] = t
""", lambda p, q: lift_alloc(p, "t")),
    ],
    [
        ("""
proc la(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    t: f32[i + 1]
    t[0] = x[i]
    y[i] = t[0]
""", lambda p, q: lift_alloc(p, "t")),
        ("""
proc la(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    t: f32
    y[i] = t
    t = x[i]
""", lambda p, q: lift_alloc(p, "t")),
    ],
)

case(
    "sink_alloc",
    [
        (LIFTED, lambda p, q: sink_alloc(p, "t")),
        ("""
proc sa(N: size, M: size, x: f32[N, M], y: f32[N, M]):
  t: f32
  for i in seq(0, N):
    for j in seq(0, M):
      t = x[i, j]
      y[i, j] = t + t
""", lambda p, q: sink_alloc(p, "t")),
        ("""
proc sa(N: size, x: f32[N], y: f32[N]):
  t: f32[2]
  for i in seq(0, N):
    t[1] = x[i]
    t[0] = t[1] * 2.0
    y[i] = t[0] + t[1]
""", lambda p, q: sink_alloc(p, "t")),
    ],
    [
        ("""
proc sa(N: size, x: f32[N], y: f32[N]):
  t: f32[4]
  for i in seq(0, N):
    t[0] = x[i]
  y[0] = t[0]
""", lambda p, q: sink_alloc(p, "t")),
        ("""
proc sa(N: size, x: f32[N], y: f32[N]):
  t: f32[2]
  for i in seq(0, N):
    t[i % 2] = x[i]
    y[i] = t[0]
""", lambda p, q: sink_alloc(p, "t")),
    ],
)

case(
    "delete_buffer",
    [
        ("""
proc db(x: f32[4]):
  t: f32[8]
  x[0] = 1.0
""", lambda p, q: delete_buffer(p, "t")),
        ("""
proc db(N: size, x: f32[N]):
  for i in seq(0, N):
    t: f32
    x[i] = 2.0
""", lambda p, q: delete_buffer(p, "t")),
        ("""
proc db(N: size, x: f32[N]):
  if N > 1:
    t: i32
    pass
  x[0] = 3.0
""", lambda p, q: delete_buffer(p, "t")),
    ],
    [
        (TEMP, lambda p, q: delete_buffer(p, "t")),
        (AXPY, lambda p, q: delete_buffer(p, p.find("x[_]"))),
    ],
)

REUSE = """
proc rb(x: f32[4], y: f32[4]):
  a: f32[4]
  a[0] = x[0] + 1.0
  y[0] = a[0]
  b: f32[4]
  b[1] = x[1] * 2.0
  y[1] = b[1]
"""

case(
    "reuse_buffer",
    [
        (REUSE, lambda p, q: reuse_buffer(p, "a", "b")),
        ("""
proc rb(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    a: f32
    a = x[i]
    y[i] = a
    b: f32
    b = x[i] * 2.0
    y[i] += b
""", lambda p, q: reuse_buffer(p, "a", "b")),
        ("""
proc rb(x: f32[4], y: f32[4]):
  a: f32[2, 2]
  a[0, 1] = x[0]
  y[0] = a[0, 1]
  b: f32[2, 2]
  b[1, 1] = x[1]
  y[1] = b[1, 1]
""", lambda p, q: reuse_buffer(p, "a", "b")),
    ],
    [
        (REUSE.replace("b: f32[4]", "b: f32[8]"), lambda p, q: reuse_buffer(p, "a", "b")),
        (REUSE.replace("y[1] = b[1]", "y[1] = b[1] + a[0]"), lambda p, q: reuse_buffer(p, "a", "b")),
    ],
)

case(
    "resize_dim",
    [
        (TEMP, lambda p, q: resize_dim(p, "t", 0, "2", "0")),
        ("""
proc rd(N: size, x: f32[N], y: f32[N]):
  assert N >= 1
  t: f32[N + 8]
  for i in seq(0, N):
    t[i + 4] = x[i]
    y[i] = t[i + 4]
""", lambda p, q: resize_dim(p, "t", 0, "N", "4")),
        ("""
proc rd(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    t: f32[N]
    t[i] = x[i]
    y[i] = t[i] * 2.0
""", lambda p, q: resize_dim(p, "t", 0, "1", "i", fold=True)),
    ],
    [
        (TEMP, lambda p, q: resize_dim(p, "t", 0, "1", "0")),
        ("""
proc rd(N: size, x: f32[N], y: f32[N]):
  t: f32[N + 8]
  for i in seq(0, N):
    t[i + 4] = x[i]
    y[i] = t[i + 4]
""", lambda p, q: resize_dim(p, "t", 0, "N", "5")),
    ],
)

case(
    "expand_dim",
    [
        (TEMP, lambda p, q: expand_dim(p, "t", "N", "i")),
        (TEMP, lambda p, q: expand_dim(p, "t", "4", "0")),
        (SCALAR, lambda p, q: expand_dim(p, "t", "3", "2")),
    ],
    [
        (TEMP, lambda p, q: expand_dim(p, "t", "3", "i")),
        (TEMP, lambda p, q: expand_dim(p, "t", "0", "0")),
        (TEMP, lambda p, q: expand_dim(p, "t", "4", "k")),
    ],
)

RA = """
proc ra(N: size, x: f32[N], y: f32[N]):
  t: f32[2, 3, 4]
  for i in seq(0, N):
    t[1, 2, 3] = x[i]
    t[0, 1, 2] = t[1, 2, 3] + 1.0
    y[i] = t[0, 1, 2]
"""

WINDOWED = SUB.replace("""proc caller(N: size, x: f32[N, 3]):
  for i in seq(0, N):
    scale(3, x[i, 0:3])""", """proc caller(N: size, x: f32[N, 3]):
  t: f32[2, 3]
  for i in seq(0, N):
    t[0, 0] = x[i, 0]
    scale(3, t[0, 0:3])
    x[i, 0] = t[0, 0]""")

case(
    "rearrange_dim",
    [
        (RA, lambda p, q: rearrange_dim(p, "t", [2, 0, 1])),
        (RA, lambda p, q: rearrange_dim(p, "t", [0, 1, 2])),
        (RA, lambda p, q: rearrange_dim(p, "t", [1, 2, 0])),
    ],
    [
        (WINDOWED, lambda p, q: rearrange_dim(p, "t", [1, 0])),
        (RA, lambda p, q: rearrange_dim(p, "t", [0, 0, 1])),
    ],
)

case(
    "divide_dim",
    [
        (TEMP, lambda p, q: divide_dim(p, "t", 0, 2)),
        (RA, lambda p, q: divide_dim(p, "t", 2, 2)),
        ("""
proc dd(N: size, x: f32[N], y: f32[N]):
  t: f32[8]
  for i in seq(0, N):
    for j in seq(0, 8):
      t[j] = x[i]
    y[i] = t[5]
""", lambda p, q: divide_dim(p, "t", 0, 4)),
    ],
    [
        (TEMP, lambda p, q: divide_dim(p, "t", 0, 3)),
        ("""
proc dd(N: size, x: f32[N], y: f32[N]):
  t: f32[N]
  for i in seq(0, N):
    t[i] = x[i]
    y[i] = t[i]
""", lambda p, q: divide_dim(p, "t", 0, 2)),
    ],
)

case(
    "mult_dim",
    [
        (RA, lambda p, q: mult_dim(p, "t", 0, 1)),
        (RA, lambda p, q: mult_dim(p, "t", 1, 2)),
        ("""
proc md(N: size, x: f32[N], y: f32[N]):
  t: f32[N, 2]
  for i in seq(0, N):
    t[i, 1] = x[i]
    y[i] = t[i, 1]
""", lambda p, q: mult_dim(p, "t", 0, 1)),
    ],
    [
        (WINDOWED, lambda p, q: mult_dim(p, "t", 0, 1)),
        ("""
proc md(N: size, M: size, x: f32[N], y: f32[N]):
  t: f32[N, M]
  for i in seq(0, N):
    t[i, 0] = x[i]
    y[i] = t[i, 0]
""", lambda p, q: mult_dim(p, "t", 0, 1)),
    ],
)

case(
    "unroll_buffer",
    [
        (TEMP, lambda p, q: unroll_buffer(p, "t", 0)),
        (RA, lambda p, q: unroll_buffer(p, "t", 0)),
        (RA, lambda p, q: unroll_buffer(p, "t", 2)),
    ],
    [
        ("""
proc ub(N: size, x: f32[N], y: f32[N]):
  t: f32[4]
  for i in seq(0, 4):
    t[i] = x[i]
  y[0] = t[2]
""", lambda p, q: unroll_buffer(p, "t", 0)),
        ("""
proc ub(N: size, x: f32[N], y: f32[N]):
  t: f32[N]
  t[0] = x[0]
  y[0] = t[0]
""", lambda p, q: unroll_buffer(p, "t", 0)),
    ],
)

case(
    "bind_expr",
    [
        (TEMP, lambda p, q: bind_expr(p, "t[0] * 2.0", "u")),
        ("""
proc be(N: size, x: f32[N], y: f32[N]):
  for i in seq(0, N):
    y[i] = (x[i] + 1.0) * (x[i] + 1.0)
""", lambda p, q: bind_expr(p, [p.find("x[_] + 1.0"), p.find("x[_] + 1.0 #1")], "u", cse=True)),
        (AXPY, lambda p, q: bind_expr(p, [p.find("2.0 * x[_]")], "u")),
    ],
    [
        (TWO, lambda p, q: bind_expr(p, [p.find("y[_] * 2.0"), p.find("x[_] + y[_]")], "u")),
        (TWO, lambda p, q: bind_expr(p, [p.find("y[_] * 2.0")], "x")),
    ],
)

case(
    "stage_mem",
    [
        (GEMV4, lambda p, q: stage_mem(
            divide_loop(p, "i", 4, ["io", "ii"], perfect=True), "ii", "y[4*io:4*io+4]", "ys")),
        (GEMV4, lambda p, q: stage_mem(
            divide_loop(p, "i", 4, ["io", "ii"], perfect=True), "ii", "y[4*io:4*io+4]", "ys", accum=True)),
        (GEMV, lambda p, q: stage_mem(p, "j", "x[0:N]", "xs")),
    ],
    [
        (GEMV4, lambda p, q: stage_mem(
            divide_loop(p, "i", 4, ["io", "ii"], perfect=True), "ii", "y[4*io:4*io+2]", "ys")),
        (GEMV, lambda p, q: stage_mem(p, "j", "x[0:N]", "A")),
    ],
)

case(
    "set_memory",
    [
        (TEMP, lambda p, q: set_memory(p, "t", "DRAM")),
        (SCALAR, lambda p, q: set_memory(p, "t", "DRAM")),
        (AXPY, lambda p, q: set_memory(p, "y", "DRAM")),
    ],
    [
        (TEMP, lambda p, q: set_memory(p, "t", "NOWHERE")),
        (TEMP, lambda p, q: set_memory(p, "t", "two words")),
    ],
)

case(
    "set_precision",
    [
        (TEMP, lambda p, q: set_precision(p, "t", "f64")),
        (AXPY, lambda p, q: set_precision(p, "y", "f64")),
        (SCALAR, lambda p, q: set_precision(p, "t", "f32")),
    ],
    [
        (TEMP, lambda p, q: set_precision(p, "t", "f16")),
        (TEMP, lambda p, q: set_precision(p, "t", "size")),
    ],
)

# --------------------------------------------------------------------------
# subprocedures

case(
    "replace",
    [
        (VADD_CALLER, lambda p, q: replace(p, "ii", q["vadd4"])),
        (VADD + """
proc add2(x: f32[8], y: f32[8], z: f32[8]):
  for k in seq(0, 4):
    z[k + 4] = x[k + 4] + y[k]
""", lambda p, q: replace(p, "k", q["vadd4"])),
        (VADD + """
proc add3(N: size, x: f32[N, 4], y: f32[N, 4]):
  for i in seq(0, N):
    for j in seq(0, 4):
      x[i, j] = y[i, j] + x[i, j]
""", lambda p, q: replace(p, "j", q["vadd4"])),
    ],
    [
        (VADD_CALLER, lambda p, q: replace(p, "io", q["vadd4"])),
        (VADD + """
proc sub(x: f32[4], y: f32[4], z: f32[4]):
  for k in seq(0, 4):
    z[k] = x[k] - y[k]
""", lambda p, q: replace(p, "k", q["vadd4"])),
        (VADD + """
proc short(x: f32[4], y: f32[4], z: f32[4]):
  for k in seq(0, 3):
    z[k] = x[k] + y[k]
""", lambda p, q: replace(p, "k", q["vadd4"])),
    ],
)

case(
    "inline",
    [
        (SUB, lambda p, q: inline(p, p.find("scale(_)"))),
        (VADD + """
proc use(x: f32[8], y: f32[8]):
  vadd4(x[0:4], y[4:8], y[0:4])
""", lambda p, q: inline(p, p.find("vadd4(_)"))),
        ("""
proc inc(n: size, v: f32[n], k: f32):
  for i in seq(0, n):
    v[i] = v[i] + k

proc outer(N: size, x: f32[N], c: f32[1]):
  for i in seq(0, N):
    inc(N, x[0:N], c[0])
""", lambda p, q: inline(p, p.find("inc(_)"))),
    ],
    [
        (SUB, lambda p, q: inline(p, "i")),
        (SUB, lambda p, q: inline(p, p.find("scale(_)").after())),
    ],
)

case(
    "call_eqv",
    [
        (SUB, lambda p, q: call_eqv(p, p.find("scale(_)"),
                                    divide_loop(q["scale"], "k", 2, ["ko", "ki"], tail="cut"))),
        (SUB, lambda p, q: call_eqv(p, p.find("scale(_)"), q["scale"])),
        (SUB, lambda p, q: call_eqv(p, p.find("scale(_)"),
                                    commute_expr(q["scale"], [q["scale"].find("v[_] * 2.0")]))),
    ],
    [
        (SUB + """
proc scale2(n: size, v: f32[n]):
  for k in seq(0, n):
    v[k] = v[k] * 2.0
""", lambda p, q: call_eqv(q["caller"], q["caller"].find("scale(_)"), q["scale2"])),
        (SUB, lambda p, q: call_eqv(p, "i", q["scale"])),
    ],
)

case(
    "extract_subproc",
    [
        (VADD_CALLER, lambda p, q: extract_subproc(p, "ii", "inner")[0]),
        (TWO, lambda p, q: extract_subproc(p, "i", "body")[0]),
        (SCALAR, lambda p, q: extract_subproc(p, p.find("y[_] = _").expand(0, 1), "tail")[0]),
    ],
    [
        (TWO, lambda p, q: extract_subproc(p, "i", "two")[0]),
        (TWO, lambda p, q: extract_subproc(p, "i", "not a name")[0]),
        (SCALAR, lambda p, q: extract_subproc(p, p.find("t: _"), "alloc_only")[0]),
    ],
)
