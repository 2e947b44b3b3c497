"""Common subexpression elimination and loop-invariant code motion."""

from ..cursors import make_node_cursor, resolve
from ..errors import InvalidCursorError, SchedulingError
from ..ir import Alloc, Assign, BinOp, Read, Reduce, USub, fresh_name, stmts_names, walk_paths
from ..primitives import bind_expr, lift_alloc, set_precision
from ..primitives.common import cursor_arg
from .combinators import hoist


def _size(e):
    return sum(1 for _ in walk_paths(e))


def _candidates(p, block):
    """Repeated numeric subexpressions in the block, biggest first."""
    groups = {}
    for sc in block:
        s = sc.node()
        if not isinstance(s, (Assign, Reduce)):
            for path, n in walk_paths(s, sc.path):
                if isinstance(n, (Assign, Reduce)):
                    _collect(p, path, n, groups)
            continue
        _collect(p, sc.path, s, groups)
    reps = [(e, paths) for e, paths in groups.items() if len(paths) > 1]
    reps.sort(key=lambda t: (-_size(t[0]), t[1][0]))
    return reps


def _collect(p, spath, s, groups):
    for path, n in walk_paths(s.rhs, spath + (("rhs", None),)):
        if any(step[0] == "idx" for step in path[len(spath) :]):
            continue
        if isinstance(n, (BinOp, USub)) or (isinstance(n, Read) and n.idx):
            groups.setdefault(n, []).append(path)


def cse(p, block, precision=None):
    """Bind each repeated subexpression of `block` once."""
    c = cursor_arg(p, block, "block", "cse")
    tried = set()
    while True:
        c = resolve(p, c)
        done = True
        for e, paths in _candidates(p, c):
            if e in tried:
                continue
            tried.add(e)
            name = fresh_name(p, "cse")
            try:
                q = bind_expr(p, [make_node_cursor(p, x) for x in paths], name, cse=True)
            except (SchedulingError, InvalidCursorError):
                continue
            if precision is not None:
                q = set_precision(q, name, precision)
            p = q
            done = False
            break
        if done:
            return p


def licm(p, loop):
    """Hoist statements that do not depend on `loop`'s iterator out of it."""
    c = cursor_arg(p, loop, "loop", "licm")
    it = c.node().iter
    local = {s.name: sc for sc, s in ((sc, sc.node()) for sc in c.body()) if isinstance(s, Alloc)}
    for sc in list(c.body()):
        try:
            s = resolve(p, sc)
        except InvalidCursorError:
            continue
        n = s.node()
        if isinstance(n, Alloc) or it in stmts_names([n]):
            continue
        q = p
        try:
            for name in sorted(_written(n) & set(local)):
                q = lift_alloc(q, local[name])
        except (SchedulingError, InvalidCursorError):
            continue
        q2, _ = hoist(q, s)
        if q2 is not q:
            p = q2
    return p


def _written(s):
    out = set()
    for _, n in walk_paths(s):
        if isinstance(n, (Assign, Reduce)):
            out.add(n.name)
    return out
