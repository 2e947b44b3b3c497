"""Loop primitives: splitting, merging, interchange and friends."""

from dataclasses import replace

from ..analysis import (
    VALID,
    YES,
    AffineForm,
    Lin,
    collect_accesses,
    facts_at,
    idempotent,
    normalize,
    prove,
    simplify_index,
)
from ..analysis import _extreme
from ..edits import Editor
from ..errors import SchedulingError
from ..ir import (
    Alloc,
    Assign,
    BinOp,
    children,
    For,
    If,
    Interval,
    Pass,
    Read,
    expr_names,
    fresh_name,
    get_at,
    int_const,
    lit,
    rename_buffer,
    stmts_names,
    subst_stmt,
    walk_stmts,
    WindowExpr,
)
from .common import (
    cursor_arg,
    finish,
    fresh_ident,
    index_expr_arg,
    int_arg,
    remap,
    require,
    require_no_conflict,
    simplify_var_uses,
)
from ..cursors import GapCursor

TAILS = ("perfect", "guard", "cut", "cut_and_guard")


# --------------------------------------------------------------------------
# small expression builders


def add(a, b):
    ca, cb = int_const(a), int_const(b)
    if ca is not None and cb is not None:
        return lit(ca + cb)
    if cb == 0:
        return a
    if ca == 0:
        return b
    return BinOp("+", a, b)


def sub(a, b):
    ca, cb = int_const(a), int_const(b)
    if ca is not None and cb is not None:
        return lit(ca - cb)
    if cb == 0:
        return a
    return BinOp("-", a, b)


def mul(k, e):
    ce = int_const(e)
    if ce is not None:
        return lit(k * ce)
    if k == 1:
        return e
    return BinOp("*", lit(k), e)


def div(e, k):
    ce = int_const(e)
    if ce is not None:
        return lit(ce // k)
    return e if k == 1 else BinOp("/", e, lit(k))


def mod(e, k):
    ce = int_const(e)
    if ce is not None:
        return lit(ce % k)
    return BinOp("%", e, lit(k))


def extent(s):
    """hi - lo of a loop, simplified when lo is zero."""
    if int_const(s.lo) == 0:
        return s.hi
    return simplify_index(BinOp("-", s.hi, s.lo))


def _loc(path):
    *pp, (lab, k) = path
    return (tuple(pp), lab), k


def _bound_names(stmts):
    out = set()
    for s in walk_stmts(stmts):
        if isinstance(s, For):
            out.add(s.iter)
        elif isinstance(s, Alloc):
            out.add(s.name)
    return out


def _range_facts(fs, ren, s):
    """Add renamed ranges for loop `s` (iterator renamed via `ren`)."""
    return fs.add_range(ren[s.iter], s.lo, s.hi)


def _rel(a, b, strict=True):
    """Constraint a < b (or a <= b) over two variable names."""
    d = AffineForm.var(b) - AffineForm.var(a)
    return Lin.from_form(d - 1 if strict else d)


# --------------------------------------------------------------------------
# divide_loop and relatives


def divide_loop(p, loop, div_const, new_iters, tail="guard", perfect=False):
    """Split loop `i` into `io` and `ii` with the inner extent `div_const`."""
    prim = "divide_loop"
    c = cursor_arg(p, loop, "loop", prim)
    k = int_arg(div_const, prim, "factor")
    if perfect:
        tail = "perfect"
    if tail not in TAILS:
        raise SchedulingError(f"{prim}: unknown tail strategy '{tail}'")
    outer, inner = _two_names(p, new_iters, prim)
    s, L = c.node(), c.path
    n = extent(s)
    facts = facts_at(p, L)
    if tail == "perfect":
        require(facts, BinOp("==", BinOp("%", n, lit(k)), lit(0)), prim, "the factor divides the extent", c)

    io, ii = Read(outer), Read(inner)
    ivar = add(add(mul(k, io), ii), s.lo)
    body = tuple(subst_stmt(b, {s.iter: ivar}) for b in s.body)
    if tail == "guard":
        guard = If(BinOp("<", add(mul(k, io), ii), n), body)
        main = For(outer, lit(0), div(add(n, lit(k - 1)), k), (For(inner, lit(0), lit(k), (guard,)),))
        inner_prefix = L + (("body", 0), ("body", 0), "body")
    else:
        main = For(outer, lit(0), div(n, k), (For(inner, lit(0), lit(k), body),))
        inner_prefix = L + (("body", 0), "body")
    new = [main]
    rem = mod(n, k)
    if tail in ("cut", "cut_and_guard") and int_const(rem) != 0:
        tvar = add(add(mul(k, div(n, k)), ii), s.lo)
        tbody = tuple(subst_stmt(b, {s.iter: tvar}) for b in s.body)
        t = For(inner, lit(0), rem, tbody)
        if tail == "cut_and_guard":
            t = If(BinOp(">", rem, lit(0)), (t,))
        new.append(t)

    ed = Editor(p)
    ed.replace_stmt(L, new)
    table = [(L, L), (L + ("body",), inner_prefix), (L + (("lo", None),), None), (L + (("hi", None),), None)]
    return finish(ed, prim, table)


def _two_names(p, names, prim):
    if isinstance(names, str):
        names = names.split()
    names = list(names)
    if len(names) != 2 or names[0] == names[1]:
        raise SchedulingError(f"{prim}: expected two distinct new iterator names")
    return fresh_ident(p, names[0], prim), fresh_ident(p, names[1], prim)


def divide_with_recompute(p, loop, outer_hi, outer_stride, new_iters):
    """Overlapping split: `for io < N: for ii < c + I - N*c` recomputing
    the overlap, legal for idempotent bodies."""
    prim = "divide_with_recompute"
    c = cursor_arg(p, loop, "loop", prim)
    s, L = c.node(), c.path
    k = int_arg(outer_stride, prim, "stride")
    nexpr = index_expr_arg(p, L, outer_hi, prim, "outer extent")
    outer, inner = _two_names(p, new_iters, prim)
    if idempotent(s.body) != YES:
        raise SchedulingError(f"{prim}: loop body is not provably idempotent", c, "idempotent(body)")
    n = extent(s)
    facts = facts_at(p, L)
    require(facts, BinOp("<=", mul(k, nexpr) if int_const(nexpr) is None else lit(k * int_const(nexpr)), n), prim, "N*c <= extent", c)
    require(facts, BinOp(">=", nexpr, lit(1)), prim, "N >= 1", c)
    ihi = simplify_index(BinOp("-", BinOp("+", lit(k), n), BinOp("*", nexpr, lit(k))), facts)
    ivar = add(add(mul(k, Read(outer)), Read(inner)), s.lo)
    body = tuple(subst_stmt(b, {s.iter: ivar}) for b in s.body)
    new = For(outer, lit(0), nexpr, (For(inner, lit(0), ihi, body),))
    ed = Editor(p)
    ed.replace_stmt(L, [new])
    table = [(L, L), (L + ("body",), L + (("body", 0), "body")), (L + (("lo", None),), None), (L + (("hi", None),), None)]
    return finish(ed, prim, table)


def mult_loops(p, loop, new_iter):
    """Collapse `for i < I: for j < c` into one loop over I*c."""
    prim = "mult_loops"
    c = cursor_arg(p, _first_loop(loop), "loop", prim)
    s, L = c.node(), c.path
    if len(s.body) != 1 or not isinstance(s.body[0], For):
        raise SchedulingError(f"{prim}: the inner loop must be the only statement of the outer loop", c)
    t = s.body[0]
    if int_const(s.lo) != 0 or int_const(t.lo) != 0:
        raise SchedulingError(f"{prim}: both loops must start at 0", c)
    kc = int_const(t.hi)
    if kc is None or kc <= 0:
        raise SchedulingError(f"{prim}: the inner loop must have a positive constant extent", c)
    name = fresh_ident(p, new_iter, prim)
    kv = Read(name)
    m = {s.iter: div(kv, kc), t.iter: mod(kv, kc)}
    if kc == 1:
        m = {s.iter: kv, t.iter: lit(0)}
    body = tuple(subst_stmt(b, m) for b in t.body)
    hi = s.hi if kc == 1 else (lit(int_const(s.hi) * kc) if int_const(s.hi) is not None else BinOp("*", s.hi, lit(kc)))
    new = For(name, lit(0), hi, body, s.parallel)
    ed = Editor(p)
    ed.replace_stmt(L, [new])
    table = [(L, L), (L + (("body", 0),), L), (L + (("body", 0), "body"), L + ("body",)), (L + (("lo", None),), None), (L + (("hi", None),), None), (L + (("body", 0), ("lo", None)), None), (L + (("body", 0), ("hi", None)), None)]
    return finish(ed, prim, table)


def _first_loop(loop):
    if isinstance(loop, str) and len(loop.split()) == 2 and "#" not in loop:
        return loop.split()[0]
    return loop


def cut_loop(p, loop, cut_point):
    """`for i in lo,hi` into `for i in lo,e` followed by `for i in e,hi`."""
    prim = "cut_loop"
    c = cursor_arg(p, loop, "loop", prim)
    s, L = c.node(), c.path
    e = index_expr_arg(p, L, cut_point, prim, "cut point")
    facts = facts_at(p, L)
    require(facts, BinOp("<=", s.lo, e), prim, "lo <= cut point", c)
    require(facts, BinOp("<=", e, s.hi), prim, "cut point <= hi", c)
    ed = Editor(p)
    ed.replace_stmt(L, [replace(s, hi=e), replace(s, lo=e)])
    table = [(L, L), (L + (("hi", None),), None)]
    return finish(ed, prim, table)


def join_loops(p, loop1, loop2):
    """Join two adjacent loops with identical bodies and abutting ranges."""
    prim = "join_loops"
    c1 = cursor_arg(p, loop1, "loop", prim)
    c2 = cursor_arg(p, loop2, "loop", prim)
    (loc1, k1), (loc2, k2) = _loc(c1.path), _loc(c2.path)
    if loc1 != loc2 or k2 != k1 + 1:
        raise SchedulingError(f"{prim}: the loops must be adjacent", c2)
    s1, s2 = c1.node(), c2.node()
    b2 = tuple(subst_stmt(b, {s2.iter: Read(s1.iter)}) for b in s2.body)
    if b2 != s1.body:
        raise SchedulingError(f"{prim}: the loop bodies differ", c2)
    facts = facts_at(p, c1.path)
    require(facts, BinOp("==", s1.hi, s2.lo), prim, "the ranges abut", c2)
    ed = Editor(p)
    ed.replace_block(loc1, k1, k1 + 2, [replace(s1, hi=s2.hi)])
    L1, L2 = c1.path, c2.path
    table = [
        (L1, L1),
        (L1 + (("hi", None),), None),
        (L2, L1),
        (L2 + ("body",), L1 + ("body",)),
        (L2 + (("lo", None),), None),
        (L2 + (("hi", None),), L1 + (("hi", None),)),
    ]
    return finish(ed, prim, table)


def shift_loop(p, loop, new_lo):
    """Re-base a loop to start at `new_lo`."""
    prim = "shift_loop"
    c = cursor_arg(p, loop, "loop", prim)
    s, L = c.node(), c.path
    e = index_expr_arg(p, L, new_lo, prim, "new lower bound")
    facts = facts_at(p, L)
    require(facts, BinOp(">=", e, lit(0)), prim, "new lower bound >= 0", c)
    order = [s.iter]
    shift = simplify_index(BinOp("+", BinOp("-", Read(s.iter), e), s.lo), order=order)
    hi = simplify_index(BinOp("-", BinOp("+", s.hi, e), s.lo))
    body = tuple(simplify_var_uses(subst_stmt(b, {s.iter: shift}), s.iter) for b in s.body)
    ed = Editor(p)
    ed.replace_stmt(L, [For(s.iter, e, hi, body, s.parallel)])
    table = [(L, L), (L + ("body",), L + ("body",))]
    return finish(ed, prim, table)


# --------------------------------------------------------------------------
# fission / fusion


def fission(p, gap, n_lifts=1):
    """Split the loop (or branch) around `gap` into two."""
    prim = "fission"
    n_lifts = int_arg(n_lifts, prim, "n_lifts")
    g = cursor_arg(p, gap, "gap", prim)
    for _ in range(n_lifts):
        p, P = _fission_once(p, g, prim)
        g = GapCursor(p, P, "after")
    return p


def _fission_once(p, g, prim):
    (pp, lab), pos = g.position()
    if not pp or lab != "body":
        raise SchedulingError(f"{prim}: the gap is not inside a loop or branch body", g)
    s = get_at(p, pp)
    if not isinstance(s, (For, If)):
        raise SchedulingError(f"{prim}: the gap is not inside a loop or branch body", g)
    if isinstance(s, If) and s.orelse:
        raise SchedulingError(f"{prim}: cannot split a branch with an else clause", g)
    s1, s2 = s.body[:pos], s.body[pos:]
    if not s1 or not s2:
        raise SchedulingError(f"{prim}: nothing to split on one side of the gap", g)
    allocs = {b.name for b in s1 if isinstance(b, Alloc)}
    used = stmts_names(s2)
    if allocs & used:
        raise SchedulingError(
            f"{prim}: statements after the gap use buffers allocated before it ({', '.join(sorted(allocs & used))})", g
        )
    if isinstance(s, For):
        facts = facts_at(p, pp)
        it = s.iter
        ra, rb = {it: it + "@a"}, {it: it + "@b"}
        fs = facts.add_range(it + "@a", s.lo, s.hi).add_range(it + "@b", s.lo, s.hi)
        A = collect_accesses(s1)
        B = collect_accesses(s2)
        # s2(i) runs before s1(i') for i < i' after the split
        try:
            require_no_conflict(
                fs, A, B, ra, rb, [_rel(it + "@b", it + "@a")], prim,
                "statements before the gap depend on later iterations of statements after it", g,
            )
        except SchedulingError:
            if not _invariant_prefix(s1, A, B, it):
                raise
    first = replace(s, body=s1)
    second = replace(s, body=s2)
    ed = Editor(p)
    P = pp
    (ploc, k) = _loc(P)
    ed.replace_block(ploc, k, k + 1, [first, second])
    P2 = P[:-1] + ((P[-1][0], k + 1),)

    def fn(d):
        tag, path = d[0], d[1]
        n = len(P)
        if path[:n] != P:
            return None
        if len(path) == n:
            if tag == "gap":
                return ("gap", P2 if d[2] == "after" else P, d[2])
            return (tag, P)
        lab2, idx = path[n]
        if lab2 != "body":
            return (tag,) + d[1:]
        if tag == "gap" and len(path) == n + 1:
            gpos = idx if d[2] == "before" else idx + 1
            if gpos == pos:
                return ("gap", P, "after")
        if isinstance(idx, tuple):
            i, j = idx
            if j <= pos:
                return d
            if i >= pos:
                return (tag, P2 + (("body", (i - pos, j - pos)),) + path[n + 1 :])
            return False
        if idx < pos:
            return d
        out = P2 + (("body", idx - pos),) + path[n + 1 :]
        return ("gap", out, d[2]) if tag == "gap" else (tag, out)

    return finish(ed, prim, fn), P


def _invariant_prefix(s1, A, B, it):
    """s1 leaves the same state on every iteration: it ignores `it`, is
    idempotent, and s2 writes nothing s1 touches.  Then hoisting all of
    s1's runs ahead of s2 is harmless even if s2 reads what s1 writes."""
    if it in stmts_names(s1) or idempotent(s1) != YES:
        return False
    touched = {a.buf for a in A}
    return not any(b.mode != "R" and b.buf in touched for b in B)


def _recompute_ok(facts, s1, s2, it, A, B):
    """Fusing is still safe when s1 only recomputes: every cell it writes
    gets a value that depends on the cell alone, and each iteration of s2
    reads only cells written by the same iteration of s1.  Later rewrites
    of a cell s2 already read then store the value it already holds."""
    written = {x.buf for x in A if x.mode != "R"}
    w2 = {x.buf for x in B if x.mode != "R"}
    if not written or written & w2:
        return False
    if any(x.mode == "R" and (x.buf in written or x.buf in w2) for x in A):
        return False
    boxes = {}
    for s, loops in _assign_nests(s1, ()):
        if s is None or s.name in boxes or not s.idx:
            return False
        box = _write_box(facts, s, loops, it)
        if box is None:
            return False
        boxes[s.name] = box
    if set(boxes) != written:
        return False
    for x in B:
        if x.buf not in boxes:
            continue
        bound = []
        for cx in x.ctx:
            if cx[0] != "for":
                return False
            lo, hi = normalize(cx[2]), normalize(cx[3])
            if lo is None or hi is None:
                return False
            bound.append((cx[1], lo, hi))
        box = boxes[x.buf]
        if len(box) != len(x.idx):
            return False
        for (wlo, whi), e in zip(box, x.idx):
            f = normalize(e)
            if f is None:
                return False
            rlo, rhi = _extreme(f, bound, False), _extreme(f, bound, True) + 1
            for pred in (BinOp("<=", wlo.to_expr(), rlo.to_expr()), BinOp("<=", rhi.to_expr(), whi.to_expr())):
                if prove(facts, pred) != VALID:
                    return False
    return True


def _assign_nests(stmts, loops):
    for s in stmts:
        if isinstance(s, For):
            yield from _assign_nests(s.body, loops + (s,))
        elif isinstance(s, Assign):
            yield s, loops
        else:
            yield None, loops


def _write_box(facts, s, loops, it):
    """Per-dimension [lo, hi) of the cells written by one iteration of the
    fused loop, or None unless the writes fill that box and the stored
    value depends on the cell alone."""
    inner = {l.iter: l for l in loops}
    vs = [it] + list(inner)
    forms = [normalize(e) for e in s.idx]
    if any(f is None or any(a for a in f.atoms() if a.inner.names() & set(vs)) for f in forms):
        return None
    used = set()
    box = []
    for f in forms:
        mine = [v for v in inner if f.coeff(v) != 0]
        if len(mine) != 1 or abs(f.coeff(mine[0])) != 1 or mine[0] in used:
            return None
        used.add(mine[0])
        l = inner[mine[0]]
        if expr_names(l.lo) & set(vs) or expr_names(l.hi) & set(vs):
            return None
        if prove(facts, BinOp("<", l.lo, l.hi)) != VALID:
            return None
        lo, hi = normalize(l.lo), normalize(l.hi)
        if lo is None or hi is None:
            return None
        bound = [(mine[0], lo, hi)]
        box.append((_extreme(f, bound, False), _extreme(f, bound, True) + 1))
    # every iterator-dependent index in the value must be a function of
    # the written cell: its iterator part lies in the span of the write's
    rows = [[f.coeff(v) for v in vs] for f in forms]
    for e in _value_indices(s.rhs, vs):
        g = normalize(e)
        if g is None or any(a for a in g.atoms() if a.inner.names() & set(vs)):
            return None
        if not _in_span(rows, [g.coeff(v) for v in vs]):
            return None
    return box


def _value_indices(e, vs):
    """Affine pieces of a value: buffer indices and iterators read as numbers."""
    if isinstance(e, Read):
        if e.name in vs:
            yield e
        yield from e.idx
    elif isinstance(e, WindowExpr):
        for i in e.idx:
            yield from ((i.lo, i.hi) if isinstance(i, Interval) else (i,))
    else:
        for _, _, ch in children(e):
            yield from _value_indices(ch, vs)


def _in_span(rows, v):
    rows = [list(r) for r in rows]
    v = list(v)
    basis = []
    for r in rows:
        for b, c in basis:
            if r[c] != 0:
                k = r[c] / b[c]
                r = [x - k * y for x, y in zip(r, b)]
        piv = next((i for i, x in enumerate(r) if x != 0), None)
        if piv is not None:
            basis.append((r, piv))
    for b, c in basis:
        if v[c] != 0:
            k = v[c] / b[c]
            v = [x - k * y for x, y in zip(v, b)]
    return all(x == 0 for x in v)


def fuse(p, s1, s2):
    """Fuse two adjacent loops with equal ranges, or two ifs with equal
    conditions."""
    prim = "fuse"
    c1 = cursor_arg(p, s1, "stmt", prim)
    c2 = cursor_arg(p, s2, "stmt", prim)
    (loc1, k1), (loc2, k2) = _loc(c1.path), _loc(c2.path)
    if loc1 != loc2 or k2 != k1 + 1:
        raise SchedulingError(f"{prim}: the statements must be adjacent", c2)
    a, b = c1.node(), c2.node()
    facts = facts_at(p, c1.path)
    L1, L2 = c1.path, c2.path
    if isinstance(a, For) and isinstance(b, For):
        require(facts, BinOp("==", a.lo, b.lo), prim, "equal lower bounds", c2)
        require(facts, BinOp("==", a.hi, b.hi), prim, "equal upper bounds", c2)
        # the fused loop keeps the second loop's iterator
        if a.iter != b.iter and b.iter in _bound_names(a.body):
            raise SchedulingError(f"{prim}: '{b.iter}' is rebound inside the first loop", c2)
        body1 = tuple(subst_stmt(x, {a.iter: Read(b.iter)}) for x in a.body)
        if b.iter != a.iter:
            body1 = tuple(_rename_iter(x, a.iter, b.iter) for x in body1)
        body2 = b.body
        _check_alloc_clash(body1, body2, prim, c2)
        it = b.iter
        fs = facts.add_range(it + "@a", a.lo, a.hi).add_range(it + "@b", a.lo, a.hi)
        A = collect_accesses(body1)
        B = collect_accesses(body2)
        # after fusion s2(i) runs before s1(i') for i < i'
        try:
            require_no_conflict(
                fs, A, B, {it: it + "@a"}, {it: it + "@b"}, [_rel(it + "@b", it + "@a")], prim,
                "the second loop depends on later iterations of the first", c2,
            )
        except SchedulingError:
            if not _recompute_ok(facts.add_range(it, a.lo, a.hi), body1, body2, it, A, B):
                raise
        new = replace(a, iter=it, body=body1 + body2)
        n1 = len(a.body)
        table = [(L1, L1), (L2, L1), (L2 + (("lo", None),), L1 + (("lo", None),)), (L2 + (("hi", None),), L1 + (("hi", None),))]
        table_fn = _fuse_fn(table, L2, "body", L1, n1)
    elif isinstance(a, If) and isinstance(b, If):
        if a.cond != b.cond:
            require(facts.add_pred(a.cond), b.cond, prim, "equal conditions", c2)
            require(facts.add_pred(b.cond), a.cond, prim, "equal conditions", c2)
        _check_alloc_clash(a.body, b.body, prim, c2)
        _check_alloc_clash(a.orelse, b.orelse, prim, c2)
        new = replace(a, body=a.body + b.body, orelse=a.orelse + b.orelse)
        table = [(L1, L1), (L2, L1), (L2 + (("cond", None),), L1 + (("cond", None),))]
        f1 = _fuse_fn(table, L2, "body", L1, len(a.body))
        f2 = _fuse_fn([], L2, "orelse", L1, len(a.orelse))

        def table_fn(d):
            r = f2(d)
            return f1(d) if r is None else r
    else:
        raise SchedulingError(f"{prim}: expected two loops or two if statements", c2)
    ed = Editor(p)
    ed.replace_block(loc1, k1, k1 + 2, [new])
    return finish(ed, prim, table_fn)


def _fuse_fn(table, L2, lab, L1, n1):
    def fn(d):
        tag, path = d[0], d[1]
        n = len(L2)
        if path[:n] == L2 and len(path) > n and path[n][0] == lab:
            idx = path[n][1]
            idx = (idx[0] + n1, idx[1] + n1) if isinstance(idx, tuple) else idx + n1
            out = L1 + ((lab, idx),) + path[n + 1 :]
            return ("gap", out, d[2]) if tag == "gap" else (tag, out)
        return remap(d, table) if table else None

    return fn


def _rename_iter(s, old, new):
    return rename_buffer(s, old, new)


def _check_alloc_clash(b1, b2, prim, c):
    allocs = {x.name for x in b1 if isinstance(x, Alloc)}
    clash = allocs & (stmts_names(b2) | _bound_names(b2))
    if clash:
        raise SchedulingError(f"{prim}: names allocated in the first body are used in the second ({', '.join(sorted(clash))})", c)


# --------------------------------------------------------------------------
# interchange and scope lifting


def reorder_loops(p, loop):
    """Interchange a loop with the loop nested directly inside it."""
    prim = "reorder_loops"
    c = cursor_arg(p, _first_loop(loop), "loop", prim)
    if isinstance(loop, str) and len(loop.split()) == 2 and "#" not in loop:
        inner = loop.split()[1]
        s = c.node()
        if len(s.body) != 1 or not isinstance(s.body[0], For) or s.body[0].iter != inner:
            raise SchedulingError(f"{prim}: '{inner}' is not the only statement of loop '{s.iter}'", c)
    return _interchange(p, c, prim)


def _interchange(p, c, prim):
    s, P = c.node(), c.path
    if len(s.body) != 1 or not isinstance(s.body[0], For):
        raise SchedulingError(f"{prim}: the loop body must be exactly one loop", c)
    t = s.body[0]
    if s.iter in expr_names(t.lo) | expr_names(t.hi):
        raise SchedulingError(f"{prim}: inner loop bounds depend on '{s.iter}'", c)
    facts = facts_at(p, P)
    i, j = s.iter, t.iter
    ra, rb = {i: i + "@a", j: j + "@a"}, {i: i + "@b", j: j + "@b"}
    fs = facts
    for r in (ra, rb):
        fs = fs.add_range(r[i], s.lo, s.hi)
        fs = fs.add_range(r[j], _ren(t.lo, i, r[i]), _ren(t.hi, i, r[i]))
    A = collect_accesses(t.body)
    # iterations whose order flips: i < i' and j > j'
    require_no_conflict(
        fs, A, A, ra, rb, [_rel(ra[i], rb[i]), _rel(rb[j], ra[j])], prim,
        "iterations whose order changes may conflict", c,
    )
    new = replace(t, body=(replace(s, body=t.body),))
    ed = Editor(p)
    ed.replace_stmt(P, [new])
    b0 = P + (("body", 0),)
    table = [
        (P, b0),
        (b0, P),
        (b0 + ("body",), b0 + ("body",)),
        (P + (("lo", None),), b0 + (("lo", None),)),
        (P + (("hi", None),), b0 + (("hi", None),)),
        (b0 + (("lo", None),), P + (("lo", None),)),
        (b0 + (("hi", None),), P + (("hi", None),)),
    ]
    return finish(ed, prim, table)


def _ren(e, old, new):
    from ..ir import subst

    return subst(e, {old: Read(new)})


def lift_scope(p, scope):
    """Swap a loop or if with the loop or if directly enclosing it."""
    prim = "lift_scope"
    c = cursor_arg(p, scope, "stmt", prim)
    inner = c.node()
    if len(c.path) < 2:
        raise SchedulingError(f"{prim}: the statement has no enclosing scope", c)
    P = c.path[:-1]
    lab, k = c.path[-1]
    outer = get_at(p, P)
    b0 = P + (("body", 0),)
    if not isinstance(inner, (For, If)):
        raise SchedulingError(f"{prim}: expected a loop or if statement", c)
    if lab != "body" or len(getattr(outer, "body", ())) != 1:
        raise SchedulingError(f"{prim}: the statement must be the only statement of the enclosing body", c)
    if isinstance(outer, For) and isinstance(inner, For):
        return _interchange(p, c.parent(), prim)
    if isinstance(outer, If) and isinstance(inner, If):
        s3 = outer.orelse
        then = If(outer.cond, inner.body, s3)
        if inner.orelse:
            els = (If(outer.cond, inner.orelse, s3),)
        elif s3:
            els = (If(outer.cond, (Pass(),), s3),)
        else:
            els = ()
        new = If(inner.cond, (then,), els)
        table = [
            (P, b0),
            (b0, P),
            (P + (("cond", None),), b0 + (("cond", None),)),
            (b0 + (("cond", None),), P + (("cond", None),)),
            (b0 + ("body",), b0 + ("body",)),
            (b0 + ("orelse",), P + (("orelse", 0), "body")),
            (P + ("orelse",), b0 + ("orelse",)),
        ]
    elif isinstance(outer, For) and isinstance(inner, If):
        if outer.iter in expr_names(inner.cond):
            raise SchedulingError(f"{prim}: the condition depends on loop iterator '{outer.iter}'", c)
        then = replace(outer, body=inner.body)
        els = (replace(outer, body=inner.orelse),) if inner.orelse else ()
        new = If(inner.cond, (then,), els)
        table = [
            (P, b0),
            (b0, P),
            (b0 + (("cond", None),), P + (("cond", None),)),
            (P + (("lo", None),), b0 + (("lo", None),)),
            (P + (("hi", None),), b0 + (("hi", None),)),
            (b0 + ("body",), b0 + ("body",)),
            (b0 + ("orelse",), P + (("orelse", 0), "body")),
        ]
    elif isinstance(outer, If) and isinstance(inner, For):
        if outer.orelse:
            raise SchedulingError(f"{prim}: the enclosing if has an else clause", c)
        new = replace(inner, body=(If(outer.cond, inner.body),))
        table = [
            (P, b0),
            (b0, P),
            (P + (("cond", None),), b0 + (("cond", None),)),
            (b0 + (("lo", None),), P + (("lo", None),)),
            (b0 + (("hi", None),), P + (("hi", None),)),
            (b0 + ("body",), b0 + ("body",)),
        ]
    else:
        raise SchedulingError(f"{prim}: the enclosing statement is not a loop or if", c)
    ed = Editor(p)
    ed.replace_stmt(P, [new])
    return finish(ed, prim, table)


# --------------------------------------------------------------------------
# adding, removing and unrolling loops


def remove_loop(p, loop):
    """Drop a loop whose body is idempotent and ignores the iterator."""
    prim = "remove_loop"
    c = cursor_arg(p, loop, "loop", prim)
    s, L = c.node(), c.path
    if s.iter in stmts_names(s.body):
        raise SchedulingError(f"{prim}: the body depends on '{s.iter}'", c)
    if idempotent(s.body) != YES:
        raise SchedulingError(f"{prim}: loop body is not provably idempotent", c, "idempotent(body)")
    require(facts_at(p, L), BinOp(">", s.hi, s.lo), prim, "the loop runs at least once", c)
    (loc, k) = _loc(L)
    n = len(s.body)
    ed = Editor(p)
    ed.replace_block(loc, k, k + 1, s.body)
    pp, lab = loc

    def fn(d):
        tag, path = d[0], d[1]
        m = len(L)
        if path[:m] != L:
            return None
        if len(path) == m:
            bp = pp + ((lab, (k, k + n)),)
            return remap(d, [(L, ("block", bp))])
        step = path[m]
        if step[0] != "body":
            return False
        idx = step[1]
        idx = (idx[0] + k, idx[1] + k) if isinstance(idx, tuple) else idx + k
        out = pp + ((lab, idx),) + path[m + 1 :]
        return ("gap", out, d[2]) if tag == "gap" else (tag, out)

    return finish(ed, prim, fn)


def add_loop(p, block, iter_name, hi, guard=False):
    """Wrap statements in a new loop `for iter in seq(0, hi)`."""
    prim = "add_loop"
    c = cursor_arg(p, block, "block", prim)
    name = fresh_ident(p, iter_name, prim)
    first = c.parent_path + ((c.label, c.rng[0]),)
    hi = index_expr_arg(p, first, hi, prim, "loop extent")
    stmts = c.stmts()
    if not guard and idempotent(stmts) != YES:
        raise SchedulingError(f"{prim}: the statements are not provably idempotent", c, "idempotent(s)")
    if any(isinstance(s, Alloc) for s in stmts):
        raise SchedulingError(f"{prim}: cannot wrap an allocation in a loop", c)
    require(facts_at(p, first), BinOp(">", hi, lit(0)), prim, "a positive extent", c)
    loc, (i, j) = c.loc, c.rng
    ed = Editor(p)
    if guard:
        ed.wrap_block(loc, i, j, If(BinOp("==", Read(name), lit(0)), ()))
        ed.wrap_block(loc, i, i + 1, For(name, lit(0), hi, ()))
    else:
        ed.wrap_block(loc, i, j, For(name, lit(0), hi, ()))
    return finish(ed, prim)


def unroll_loop(p, loop):
    """Fully unroll a loop with constant bounds."""
    prim = "unroll_loop"
    c = cursor_arg(p, loop, "loop", prim)
    s, L = c.node(), c.path
    lo, hi = int_const(simplify_index(s.lo)), int_const(simplify_index(s.hi))
    if lo is None or hi is None:
        raise SchedulingError(f"{prim}: loop bounds are not constant", c)
    if hi - lo <= 0:
        raise SchedulingError(f"{prim}: the loop runs zero times", c)
    taken = set()
    out = []
    for v in range(lo, hi):
        body = tuple(subst_stmt(b, {s.iter: lit(v)}) for b in s.body)
        if v > lo:
            for b in s.body:
                if isinstance(b, Alloc):
                    nn = fresh_name(p, f"{b.name}_{v - lo}", taken)
                    taken.add(nn)
                    body = tuple(rename_buffer(x, b.name, nn) for x in body)
        out.extend(body)
    (loc, k) = _loc(L)
    pp, lab = loc
    ed = Editor(p)
    ed.replace_block(loc, k, k + 1, out)
    total = len(out)

    def fn(d):
        tag, path = d[0], d[1]
        m = len(L)
        if path[:m] != L:
            return None
        if len(path) == m:
            return remap(d, [(L, ("block", pp + ((lab, (k, k + total)),)))])
        step = path[m]
        if step[0] != "body":
            return False
        idx = step[1]
        idx = (idx[0] + k, idx[1] + k) if isinstance(idx, tuple) else idx + k
        o = pp + ((lab, idx),) + path[m + 1 :]
        return ("gap", o, d[2]) if tag == "gap" else (tag, o)

    return finish(ed, prim, fn)


def parallelize_loop(p, loop):
    """Mark a loop parallel when no two iterations conflict."""
    prim = "parallelize_loop"
    c = cursor_arg(p, loop, "loop", prim)
    s, L = c.node(), c.path
    it = s.iter
    fs = facts_at(p, L).add_range(it + "@a", s.lo, s.hi).add_range(it + "@b", s.lo, s.hi)
    A = collect_accesses(s.body)
    require_no_conflict(
        fs, A, A, {it: it + "@a"}, {it: it + "@b"}, [_rel(it + "@a", it + "@b")], prim,
        "distinct iterations may conflict", c, reduce_commutes=False,
    )
    ed = Editor(p)
    ed.replace(L, replace(s, parallel=True))
    return finish(ed, prim)
