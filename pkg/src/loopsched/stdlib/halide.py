"""Halide-style compute_at / store_at over nominal references.

Halide names a loop by the buffer a loop nest computes plus the loop's
iterator.  These helpers translate such names into cursors, then
reschedule with primitives only: bounds inference decides how much of the
producer each consumer iteration needs, divide_with_recompute tiles the
producer with that overlap, and fuse merges the nests one level at a time.
"""

from ..analysis import VALID, AnalysisError, bounds_infer, facts_at, normalize, prove
from ..cursors import ForCursor, resolve
from ..errors import InvalidCursorError, SchedulingError
from ..ir import Alloc, Assign, BinOp, Interval, Reduce, WindowExpr, fresh_name, lit, stmts_names, walk_stmts
from ..primitives import delete_buffer, divide_loop, divide_with_recompute, fuse, lift_scope, reorder_loops, stage_mem
from .combinators import preorder


def _writes(node, name):
    return any(isinstance(s, (Assign, Reduce)) and s.name == name for s in walk_stmts([node]))


def consumer_loop(p, consumer, loop):
    """The loop named `loop` in the nest that computes `consumer`."""
    for c in preorder(p.body_cursor()):
        if isinstance(c, ForCursor) and c.node().iter == loop and _writes(c.node(), consumer):
            return c
    raise SchedulingError(f"no loop '{loop}' around the computation of '{consumer}'")


def _chain(c):
    """Loops from the top-level statement holding `c` down to `c`."""
    out = [c]
    while True:
        try:
            par = out[0].parent()
        except InvalidCursorError:
            break
        if not isinstance(par, ForCursor):
            break
        out.insert(0, par)
    return out


def _producer(p, top, producer):
    k = top.path[-1][1]
    if k == 0:
        raise SchedulingError(f"'{producer}' is not computed before its consumer", top)
    prev = top.prev()
    if not _writes(prev.node(), producer):
        raise SchedulingError(f"'{producer}' must be computed directly before its consumer", top)
    if not isinstance(prev, ForCursor):
        raise SchedulingError(f"'{producer}' is not computed by a loop nest", prev)
    return prev


def _write_iter(pc, producer, dim):
    """Producer loop iterator that walks dimension `dim` of its output."""
    for s in walk_stmts([pc.node()]):
        if isinstance(s, Assign) and s.name == producer:
            f = normalize(s.idx[dim])
            loops = {x.iter for x in walk_stmts([pc.node()]) if hasattr(x, "iter")}
            its = [v for v in loops if f is not None and f.coeff(v) != 0]
            if len(its) == 1 and f.coeff(its[0]) == 1:
                return its[0]
    raise SchedulingError(f"cannot find the loop that writes dimension {dim} of '{producer}'", pc)


def _find_in(p, top, it):
    for c in [top] + list(preorder(top)):
        if isinstance(c, ForCursor) and c.node().iter == it:
            return c
    raise SchedulingError(f"no loop '{it}' in the producer", top)


def _fuse_level(p, pc, cc, producer):
    """Tile the producer nest `pc` to match consumer loop `cc` and fuse."""
    loop = cc.node()
    v = loop.iter
    if prove_const(p, cc, loop.lo) != 0:
        raise SchedulingError("consumer loops must start at 0", cc)
    try:
        win = bounds_infer(cc, producer)
    except AnalysisError as e:
        raise SchedulingError(f"bounds inference failed: {e}", cc)
    dims = [d for d, (lo, _) in enumerate(win.dims) if lo.coeff(v) != 0]
    if len(dims) != 1:
        raise SchedulingError(f"expected exactly one dimension of '{producer}' to follow '{v}'", cc)
    d = dims[0]
    stride = win.dims[d][0].coeff(v)
    if stride.denominator != 1 or stride < 1:
        raise SchedulingError(f"'{producer}' does not advance by a whole stride along '{v}'", cc)
    stride = int(stride)
    it = _write_iter(pc, producer, d)
    # bring the producer loop for that dimension to the top of its nest
    lc = _find_in(p, pc, it)
    while len(lc.path) > len(pc.path):
        p = lift_scope(p, lc)
        lc = resolve(p, lc)
    s = lc.node()
    n_expr = loop.hi
    facts_ok = prove_eq(p, lc, BinOp("*", n_expr, lit(stride)), BinOp("-", s.hi, s.lo))
    taken = stmts_names(p.body)
    vo = fresh_name(p, it + "o", taken)
    vi = fresh_name(p, it + "i", taken | {vo})
    if facts_ok:
        p = divide_loop(p, lc, stride, [vo, vi], perfect=True)
    else:
        p = divide_with_recompute(p, lc, n_expr, stride, [vo, vi])
    lc = resolve(p, lc)
    return fuse(p, lc, resolve(p, cc)), it, vi


def prove_const(p, c, e):
    f = normalize(e)
    return f.const if f is not None and f.is_const() else None


def prove_eq(p, c, a, b):
    return prove(facts_at(p, c.path), BinOp("==", a, b)) == VALID


def _restore_order(p, pc, order):
    """Reorder directly nested producer loops back to their original order."""
    changed = True
    while changed:
        changed = False
        pc = resolve(p, pc)
        for c in [pc] + list(preorder(pc)):
            if not isinstance(c, ForCursor) or len(c.node().body) != 1:
                continue
            inner = c.node().body[0]
            if not hasattr(inner, "iter") or inner.iter not in order or c.node().iter not in order:
                continue
            if order[inner.iter] < order[c.node().iter]:
                try:
                    p = reorder_loops(p, c)
                except SchedulingError:
                    continue
                changed = True
                break
    return p


def _window_expr(buf, win):
    idx = tuple(Interval(lo.to_expr(), hi.to_expr()) for lo, hi in win.dims)
    return WindowExpr(buf, idx)


def halide_store_at(p, producer, consumer, loop, new_name=None):
    """Allocate the part of `producer` that one iteration of the consumer's
    `loop` touches inside that loop, sized by bounds inference."""
    lc = consumer_loop(p, consumer, loop) if isinstance(loop, str) else resolve(p, loop)
    try:
        win = bounds_infer(lc, producer)
    except AnalysisError as e:
        raise SchedulingError(f"bounds inference failed: {e}", lc)
    name = new_name or fresh_name(p, producer + "_tile", stmts_names(p.body))
    p = stage_mem(p, lc.body(), _window_expr(producer, win), name)
    # the whole buffer is gone when every use moved into the tile
    for c in preorder(p.body_cursor()):
        if isinstance(c.node(), Alloc) and c.node().name == producer:
            try:
                p = delete_buffer(p, c)
            except SchedulingError:
                pass
            break
    return p


def halide_compute_at(p, producer, consumer, loop, store=True):
    """Compute `producer` inside the consumer's `loop`, recomputing the
    overlap between iterations as Halide does.  Like Halide, storage moves
    to the same loop unless `store` is False."""
    target = consumer_loop(p, consumer, loop)
    if _writes(target.node(), producer):
        # already computed here: only the storage moves
        return halide_store_at(p, producer, consumer, loop) if store else p
    chain = _chain(target)
    names = [c.node().iter for c in chain]
    pc = _producer(p, chain[0], producer)
    order = {x.iter: k for k, x in enumerate(s for s in walk_stmts([pc.node()]) if hasattr(s, "iter"))}
    for k, name in enumerate(names):
        cc = consumer_loop(p, consumer, name)
        if k > 0:
            parent = cc.parent()
            if len(parent.node().body) != 2 or not parent.body()[1].node() is cc.node():
                raise SchedulingError(f"loop '{name}' must be the only statement around the consumer", cc)
            pc = parent.body()[0]
        p, old, vi = _fuse_level(p, pc, cc, producer)
        order[vi] = order[old]
        cc = consumer_loop(p, consumer, name)
        pc = cc.body()[0]
        p = _restore_order(p, pc, order)
    if store:
        p = halide_store_at(p, producer, consumer, loop)
    return p
