"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with `pytest tests/test_acceptance.py -v` or as a script with
`python3 tests/test_acceptance.py`.
"""

import re
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from loopsched import cli  # noqa: E402
from loopsched.analysis import AffineForm, bounds_infer  # noqa: E402
from loopsched.edits import Editor  # noqa: E402
from loopsched.errors import (  # noqa: E402
    EditError,
    InternalError,
    InvalidCursorError,
    SchedulingError,
)
from loopsched.interp import check_equiv  # noqa: E402
from loopsched.ir import Alloc, Call, walk_stmts  # noqa: E402
from loopsched.parser import parse_file, parse_procs  # noqa: E402
from loopsched.primitives import CATALOG, divide_loop  # noqa: E402
from loopsched.printer import print_proc, print_procs  # noqa: E402
from loopsched.stdlib import (  # noqa: E402
    fission_after,
    fma_rule,
    halide_compute_at,
    load_machine,
    optimize_level_1,
    remove_parent_loop,
    reorder_before,
    repeat_op,
    seq_ops,
    tile2D,
    try_else,
    vectorize,
)

from analysis_fuzz import check_dependence, check_predicate  # noqa: E402
from catalog_cases import CASES  # noqa: E402
from fwd_fuzz import check_triple  # noqa: E402

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"
MACHINES = Path(cli.__file__).parent / "machines"


def fixture(name, proc):
    return parse_file(FIXTURES / name)[proc]


def squash(text):
    return re.sub(r"\s+", "", text)


def report(n, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title}"
    if detail:
        line += f" ({detail})"
    return line


# each check returns (ok, detail)


def c1_primitive_safety():
    t0 = time.time()
    missing = sorted(set(CATALOG) - set(CASES))
    bad = []
    npos = nneg = 0
    for name, (pos, neg) in sorted(CASES.items()):
        if len(pos) < 3 or len(neg) < 2:
            bad.append(f"{name}: too few fixtures")
        for k, (src, action) in enumerate(pos):
            ps = parse_procs(src)
            p = ps[-1]
            try:
                r = action(p, {q.name: q for q in ps})
                rep = check_equiv(p, r, trials=20, size_range=(1, 12))
                if not rep.equal:
                    bad.append(f"{name}+{k}: {rep.summary()}")
            except Exception as e:  # noqa: BLE001
                bad.append(f"{name}+{k}: {type(e).__name__}: {e}")
            npos += 1
        for k, (src, action) in enumerate(neg):
            ps = parse_procs(src)
            try:
                action(ps[-1], {q.name: q for q in ps})
                bad.append(f"{name}-{k}: accepted")
            except SchedulingError:
                pass
            except Exception as e:  # noqa: BLE001
                bad.append(f"{name}-{k}: {type(e).__name__}")
            nneg += 1
    dt = time.time() - t0
    ok = not missing and not bad and dt < 60
    detail = f"{len(CASES)} primitives, {npos} positive, {nneg} negative, {dt:.1f}s"
    if missing or bad:
        detail += f"; missing={missing} bad={bad[:3]}"
    return ok, detail


def c2_forwarding():
    failures = []
    for seed in range(1000):
        failures += check_triple(seed)
    return not failures, f"1000 triples, {len(failures)} violations" + (f": {failures[:2]}" if failures else "")


def c3_tiling_golden():
    g = fixture("gemv.exo2ir", "gemv")
    q = tile2D(g, "i", "j", ["io", "ii"], ["jo", "ji"], 8, 8)
    body = print_proc(q).split("assert N % 8 == 0", 1)[1]
    same = squash(body) == squash((GOLDEN / "gemv_tiled.txt").read_text())
    eq = check_equiv(g, q).equal
    return same and eq, f"listing {'matches' if same else 'differs'}, equiv={eq}"


def c4_bounds():
    p = fixture("bounds.exo2ir", "stencil")
    (lo, hi), = bounds_infer(p.find_loop("io"), "arr").dims
    got = f"[{lo}, {hi})"
    ok = lo == AffineForm({"io": 32}, 0) and hi == AffineForm({"io": 32}, 34)
    return ok, f"arr window {got}"


HOIST = repeat_op(try_else(seq_ops(fission_after, remove_parent_loop), reorder_before))


def c5_hoisting():
    procs = parse_file(FIXTURES / "hoist.exo2ir")
    depths = {}
    for name, want in (("hoist_free", 0), ("hoist_outer", 1), ("hoist_inner", 2)):
        p = procs[name]
        s = p.find("s[_] = _")
        q, _ = HOIST(p, s)
        if not check_equiv(p, q).equal:
            return False, f"{name} not equivalent"
        depths[name] = (len(q.forward(s).path) - 1, want)
    ok = all(a == b for a, b in depths.values())
    return ok, ", ".join(f"{k}: {a} loops left" for k, (a, _) in depths.items())


def c6_vectorize():
    m = load_machine("v8f32")
    saxpy = fixture("blas1.exo2ir", "saxpy")
    notes = []
    ok = True
    for n in (8, 24, 37):
        p = saxpy.partial_eval(N=n)
        plain = vectorize(p, "i", 8, "f32", m.mem_type, m.get_instructions())
        fused = vectorize(p, "i", 8, "f32", m.mem_type, m.get_instructions(), [fma_rule])
        for q in (plain, fused):
            calls_only = all(isinstance(s, (Alloc, Call)) for s in q.body[0].body)
            tail_ok = (len(q.body) == 2) == (n % 8 != 0)
            eq = check_equiv(p, q).equal
            ok &= calls_only and tail_ok and eq
        na = sum(isinstance(s, Alloc) for s in walk_stmts(plain.body))
        nf = sum(isinstance(s, Alloc) for s in walk_stmts(fused.body))
        ok &= nf == na - 1
        notes.append(f"N={n}: temps {na}->{nf}")
    return ok, "; ".join(notes)


def c7_blur():
    b = fixture("blur.exo2ir", "blur")
    win = bounds_infer(b.find_loop("xo"), "blur_x")
    q = halide_compute_at(b, "blur_x", "blur_y", "xo")
    tiles = [s for s in walk_stmts(q.body) if isinstance(s, Alloc) and s.name.startswith("blur_x")]
    ext = [int((hi - lo).const) for lo, hi in win.dims]
    sized = len(tiles) == 1 and [int(d.val) for d in tiles[0].dims] == ext
    b64 = b.partial_eval(H=64, W=64)
    eq = check_equiv(b64, halide_compute_at(b64, "blur_x", "blur_y", "xo"), trials=3).equal
    return sized and eq, f"tile extents {ext}, 64x64 equiv={eq}"


def c8_level1():
    procs = parse_file(FIXTURES / "blas1.exo2ir")
    runs = 0
    for mname in ("v8f32", "v8f32p"):
        m = load_machine(mname)
        for name in ("saxpy", "sdot", "sscal"):
            for f in (1, 2, 4) if name == "sdot" else (1, 2):
                p = procs[name]
                rep = check_equiv(p, optimize_level_1(p, "i", "f32", m, f))
                if not rep.equal:
                    return False, f"{mname}/{name}/x{f}: {rep.summary()}"
                runs += 1
    return True, f"{runs} schedules oracle-equal"


def c9_errors():
    classes = (SchedulingError, InvalidCursorError, InternalError)
    distinct = all(not issubclass(a, b) for a in classes for b in classes if a is not b)
    axpy = fixture("blas1.exo2ir", "saxpy")

    def op(p, c):
        return divide_loop(p, c, 2, ["io", "ii"], tail="cut"), c

    def fallback(p, c):
        return "fallback", c

    real_finish = Editor.finish

    def broken(self, *a, **kw):
        raise EditError("injected edit fault")

    Editor.finish = broken
    try:
        try_else(op, fallback)(axpy, axpy.find_loop("i"))
        propagated = False
    except InternalError:
        propagated = True
    finally:
        Editor.finish = real_finish
    # a scheduling failure is still recovered
    recovered = try_else(lambda p, c: divide_loop(p, c, 7, ["a", "b"], perfect=True), fallback)(
        axpy, axpy.find_loop("i")
    )[0] == "fallback"
    ok = distinct and propagated and recovered
    return ok, f"distinct={distinct}, internal propagates={propagated}, scheduling recovered={recovered}"


def c10_roundtrip():
    corpus = sorted(FIXTURES.glob("*.exo2ir")) + sorted(MACHINES.glob("*.exo2ir"))
    for path in corpus:
        procs = parse_procs(path.read_text())
        text = print_procs(procs)
        if parse_procs(text) != procs or print_procs(parse_procs(text)) != text:
            return False, f"{path.name} not a fixpoint"
    import contextlib
    import io

    outs = []
    for _ in range(2):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = cli.main(["schedule", str(FIXTURES / "gemv.exo2ir"), "gemv", str(FIXTURES / "gemv_tile.sched")])
        outs.append((code, buf.getvalue().encode()))
    stable = outs[0] == outs[1] and outs[0][0] == 0
    return stable, f"{len(corpus)} files round-trip, replay byte-stable={stable}"


def c11_analysis():
    unsound = []
    counts = {}
    for seed in range(250):
        v, bad = check_predicate(seed)
        counts[v] = counts.get(v, 0) + 1
        if bad:
            unsound.append(("pred", seed))
    for seed in range(250):
        v, bad = check_dependence(seed)
        counts[v] = counts.get(v, 0) + 1
        if bad:
            unsound.append(("dep", seed))
    spread = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    return not unsound, f"500 queries, {len(unsound)} unsound; {spread}"


CRITERIA = [
    (1, "primitive safety suite", c1_primitive_safety),
    (2, "cursor forwarding fuzz", c2_forwarding),
    (3, "tiling golden", c3_tiling_golden),
    (4, "bounds inference on the stencil", c4_bounds),
    (5, "hoisting combinator", c5_hoisting),
    (6, "saxpy vectorization", c6_vectorize),
    (7, "blur compute_at", c7_blur),
    (8, "optimize_level_1 on BLAS-1", c8_level1),
    (9, "error taxonomy and try_else", c9_errors),
    (10, "round trip and replay stability", c10_roundtrip),
    (11, "analysis soundness", c11_analysis),
]


@pytest.mark.parametrize("n, title, check", CRITERIA, ids=[f"c{n}" for n, _, _ in CRITERIA])
def test_criterion(n, title, check, capsys):
    try:
        ok, detail = check()
    except Exception as e:  # noqa: BLE001
        ok, detail = False, f"{type(e).__name__}: {e}"
    with capsys.disabled():
        print("\n" + report(n, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n, title, check in CRITERIA:
        try:
            ok, detail = check()
        except Exception as e:  # noqa: BLE001
            ok, detail = False, f"{type(e).__name__}: {e}"
        failed += not ok
        print(report(n, title, ok, detail))
    sys.exit(1 if failed else 0)
