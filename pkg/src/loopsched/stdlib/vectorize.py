"""A vectorizer and a BLAS level-1 pipeline built from the primitives."""

from ..cursors import ForCursor, ReduceCursor, resolve
from ..errors import InvalidCursorError, SchedulingError
from ..ir import (
    Alloc,
    Assign,
    BinOp,
    Const,
    Read,
    Reduce,
    USub,
    expr_names,
    fresh_name,
    stmts_names,
    walk_stmts,
)
from ..printer import print_expr
from ..primitives import (
    bind_expr,
    divide_loop,
    expand_dim,
    fission,
    lift_alloc,
    reorder_loops,
    replace,
    set_memory,
    set_precision,
    simplify,
    stage_mem,
    unroll_loop,
)
from ..primitives.common import cursor_arg
from .combinators import RECOVERABLE, preorder
from .opt import cse, licm

STAGE, DESCEND, SKIP = "stage", "descend", "skip"


def _fresh(p, base):
    return fresh_name(p, base, stmts_names(p.body))


def _mem_of(p, name):
    for a in p.args:
        if a.name == name:
            return a.mem
    for s in walk_stmts(p.body):
        if isinstance(s, Alloc) and s.name == name:
            return s.mem
    return None


def _window_text(name, idx):
    if not idx:
        return name
    return f"{name}[{', '.join(print_expr(i) for i in idx)}]"


# --------------------------------------------------------------------------
# reductions


def parallelize_reductions(p, loop, width=None, mem=None):
    """Give every lane-invariant reduction in the inner loop of `loop` its
    own per-lane accumulator.

    `loop` must be the outer loop of a divided pair, with the inner loop of
    extent `width` as its only statement.  The accumulator is zeroed before
    the pair and summed into the original target after it."""
    c = cursor_arg(p, loop, "loop", "parallelize_reductions")
    inner = c.body()[0]
    if len(c.node().body) != 1 or not isinstance(inner, ForCursor):
        raise SchedulingError("parallelize_reductions: expected a loop directly inside the loop", c)
    io, ii = c.node().iter, inner.node().iter
    if width is None:
        width = inner.node().hi
    targets = []
    for s in inner.node().body:
        if isinstance(s, Reduce) and not ({io, ii} & set().union(set(), *(expr_names(e) for e in s.idx))):
            if _window_text(s.name, s.idx) not in targets:
                targets.append(_window_text(s.name, s.idx))
    for window in targets:
        p = _parallelize_one(p, c, inner, window, width, mem)
    return p


def _parallelize_one(p, outer, inner, window, width, mem):
    # for io: for ii: r += e   ~>   for ii: for io: r += e
    p = reorder_loops(p, outer)
    io_loop = p.forward(outer)
    acc = _fresh(p, "acc")
    p = stage_mem(p, io_loop.as_block(), window, acc, accum=True)
    ii = p.forward(inner).node().iter
    p = expand_dim(p, acc, width, ii)
    p = lift_alloc(p, acc)
    if mem is not None:
        p = set_memory(p, acc, mem)
    # split off the zeroing and the final sum, then restore the loop order
    ii_loop = p.forward(inner)
    p = fission(p, ii_loop.body()[0].after())
    ii_loop = p.forward(inner).next()
    p = fission(p, ii_loop.body()[0].after())
    mid = p.forward(inner).next()
    p = reorder_loops(p, mid)
    return p


# --------------------------------------------------------------------------
# staging


def fma_rule(c):
    """Keep `a * b` whole when it is the right side of a reduction, so the
    statement becomes a fused multiply-add."""
    e = c.node()
    if isinstance(e, BinOp) and e.op == "*":
        try:
            parent = c.parent()
        except InvalidCursorError:
            return None
        if isinstance(parent, ReduceCursor):
            return DESCEND
    return None


def _decide(c, rules, local):
    for r in rules:
        d = r(c)
        if d is not None:
            return d
    e = c.node()
    if isinstance(e, Read):
        return SKIP if e.name in local else STAGE
    if isinstance(e, (Const, BinOp, USub)):
        return STAGE
    return SKIP


def _children(c):
    e = c.node()
    if isinstance(e, BinOp):
        return [c.lhs(), c.rhs()]
    if isinstance(e, USub):
        return [c.child("arg")]
    return []


def _process(p, c, decision, rules, local, temps, precision):
    if decision == SKIP:
        return p
    for ch in _children(c):
        ch = resolve(p, ch)
        p = _process(p, ch, _decide(ch, rules, local), rules, local, temps, precision)
    if decision == STAGE:
        name = _fresh(p, "v")
        p = bind_expr(p, resolve(p, c), name)
        if precision is not None:
            p = set_precision(p, name, precision)
        temps.append(name)
        local.add(name)
    return p


def stage_compute(p, inner, precision=None, mem=None, rules=(), width=None):
    """Break each statement of loop `inner` into unary and binary steps on
    temporaries that hold one lane per iteration.

    `rules` are called with an expression cursor and may return "stage",
    "descend" or "skip" to override the default (stage every operand and
    every operation)."""
    c = cursor_arg(p, inner, "loop", "stage_compute")
    it = c.node().iter
    if width is None:
        width = c.node().hi
    rules = list(rules)
    temps = []
    for s in c.node().body:
        if isinstance(s, Alloc):
            temps.append(s.name)
    local = set(temps)
    local |= {a.name for a in p.args if mem is not None and a.mem == mem}
    local |= {s.name for s in walk_stmts(p.body) if isinstance(s, Alloc) and mem is not None and s.mem == mem}
    for sc in list(c.body()):
        s = resolve(p, sc)
        n = s.node()
        if isinstance(n, Alloc):
            continue
        if not isinstance(n, (Assign, Reduce)):
            raise SchedulingError(f"stage_compute: cannot stage a {type(n).__name__}", s)
        if n.name not in local and isinstance(n, Reduce):
            name = _fresh(p, "v")
            p = stage_mem(p, s.as_block(), _window_text(n.name, n.idx), name)
            temps.append(name)
            local.add(name)
            s = resolve(p, sc)
            n = s.node()
        rc = s.rhs()
        if isinstance(n, Assign) and n.name in local:
            root = DESCEND
        else:
            root = _decide(rc, rules, local)
        p = _process(p, rc, root, rules, local, temps, precision)
    for t in temps:
        p = expand_dim(p, t, width, it)
        p = lift_alloc(p, t)
        if mem is not None:
            p = set_memory(p, t, mem)
    return p


def fission_into_singles(p, inner):
    """Split loop `inner` so that every resulting loop has one statement."""
    c = cursor_arg(p, inner, "loop", "fission_into_singles")
    loop = c
    while len(loop.node().body) > 1:
        p = fission(p, loop.body()[0].after())
        loop = p.forward(loop).next()
    return p


def replace_all_stmts(p, instrs):
    """Replace every statement or loop that matches an instruction."""
    instrs = list(instrs)
    if not instrs:
        return p
    for c in list(preorder(p.body_cursor())):
        try:
            c = resolve(p, c)
        except InvalidCursorError:
            continue
        for ins in instrs:
            try:
                p = replace(p, c.as_block(), ins)
                break
            except RECOVERABLE:
                continue
    return p


# --------------------------------------------------------------------------
# the vectorizer


def _vectorize(p, loop, vw, precision, mem, instrs, rules, tail):
    c = cursor_arg(p, loop, "loop", "vectorize")
    it = c.node().iter
    io = _fresh(p, it + "o")
    ii = fresh_name(p, it + "i", stmts_names(p.body) | {io})
    ptail = tail == "cut_and_pred"
    p = divide_loop(p, c, vw, [io, ii], tail="cut" if ptail else tail)
    outer = p.forward(c)
    tail_loop = None
    if tail in ("cut", "cut_and_pred"):
        nxt = _next_loop(p, outer)
        if nxt is not None and nxt.node().iter == ii:
            tail_loop = nxt
    p = parallelize_reductions(p, outer, vw, mem)
    main = p.find_loop(io)
    inner = main.body()[0]
    p = stage_compute(p, inner, precision, mem, rules, vw)
    p = fission_into_singles(p, p.find_loop(io).body()[-1])
    if tail_loop is not None and ptail:
        try:
            q = stage_compute(p, tail_loop, precision, mem, rules, vw)
            p = fission_into_singles(q, q.forward(tail_loop))
        except RECOVERABLE:
            pass
    p = replace_all_stmts(p, instrs)
    return p, io


def _next_loop(p, c):
    try:
        n = c.next()
    except InvalidCursorError:
        return None
    return n if isinstance(n, ForCursor) else None


def vectorize(p, loop, vw, precision, mem, instrs, rules=(), tail="cut"):
    """Vectorize `loop` with width `vw` using the instruction procedures
    `instrs`; any remainder iterations run in a scalar tail loop."""
    return _vectorize(p, loop, vw, precision, mem, instrs, rules, tail)[0]


def interleave_loop(p, loop, factor, mem=None, tail="cut"):
    """Unroll `factor` consecutive iterations of `loop` into one body, each
    copy with its own temporaries."""
    c = cursor_arg(p, loop, "loop", "interleave_loop")
    if factor == 1:
        return p
    it = c.node().iter
    o = _fresh(p, it + "o")
    i = fresh_name(p, it + "i", stmts_names(p.body) | {o})
    p = divide_loop(p, c, factor, [o, i], tail=tail)
    return unroll_loop(p, p.forward(c).body()[0])


def optimize_level_1(p, loop, precision, machine, interleave_factor=1, vec_tail=None, inter_tail="cut"):
    """CSE, vectorize, hoist invariants, interleave, select instructions."""
    vec_width = machine.vec_width(precision)
    instrs = machine.get_instructions(precision)
    memory = machine.mem_type
    rules = [fma_rule] if machine.has_fma else []
    if vec_tail is None:
        vec_tail = "cut_and_pred" if machine.supports_predication else "cut"
    loop = resolve(p, cursor_arg(p, loop, "loop", "optimize_level_1"))
    p = cse(p, loop.body(), precision)
    p, io = _vectorize(p, loop, vec_width, precision, memory, (), rules, vec_tail)
    p = licm(p, p.find_loop(io))
    p = interleave_loop(p, p.find_loop(io), interleave_factor, memory, inter_tail)
    p = simplify(p)
    return replace_all_stmts(p, instrs)
