"""Helpers shared by the scheduling primitives."""

import re

from ..analysis import VALID, explain, facts_at, may_conflict
from ..cursors import (
    AllocCursor,
    BlockCursor,
    CallCursor,
    Cursor,
    ExprCursor,
    ForCursor,
    GapCursor,
    IfCursor,
    NodeCursor,
    StmtCursor,
    find,
    find_loop,
    resolve,
)
from ..errors import InvalidCursorError, SchedulingError
from ..ir import Expr, get_at, names_in_proc
from ..printer import print_expr

IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")
LOOP_REF = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\s*(#\s*\d+)?\Z")

KINDS = {
    "loop": (ForCursor, "a loop"),
    "if": (IfCursor, "an if statement"),
    "stmt": (StmtCursor, "a statement"),
    "alloc": (AllocCursor, "an allocation"),
    "call": (CallCursor, "a call"),
    "expr": (ExprCursor, "an expression"),
    "block": (BlockCursor, "a block"),
    "gap": (GapCursor, "a gap"),
}


def cursor_arg(p, c, want, prim):
    """Resolve a cursor or pattern string against `p` and check its kind.

    Cursors made on an ancestor version are forwarded implicitly.  A bare
    identifier names a loop (for loop arguments) or an allocation.
    """
    if isinstance(c, str):
        text = c.strip()
        if want in ("loop", "stmt", "block") and LOOP_REF.match(text):
            c = find_loop(p, text)
        elif want == "alloc" and LOOP_REF.match(text):
            name, _, sel = text.partition("#")
            c = find(p, f"{name.strip()} : _" + (f" #{sel.strip()}" if sel else ""))
        else:
            c = find(p, text)
    elif isinstance(c, Cursor):
        c = resolve(p, c)
    else:
        raise SchedulingError(f"{prim}: expected a cursor or pattern, got {type(c).__name__}")
    if want == "block" and isinstance(c, StmtCursor):
        c = c.as_block()
    cls, what = KINDS[want]
    if not isinstance(c, cls):
        got = type(c.node()).__name__ if isinstance(c, NodeCursor) else type(c).__name__
        raise SchedulingError(f"{prim}: expected {what}, got {got}", c)
    return c


def buffer_arg(p, c, prim):
    """An allocation cursor, or the name of a numeric parameter."""
    if isinstance(c, str) and IDENT.match(c.strip()):
        name = c.strip()
        for a in p.args:
            if a.name == name and a.is_numeric:
                return a
    return cursor_arg(p, c, "alloc", prim)


def fresh_ident(p, name, prim, taken=()):
    if not isinstance(name, str) or not IDENT.match(name):
        raise SchedulingError(f"{prim}: '{name}' is not a valid identifier")
    if name in names_in_proc(p) or name in taken or _used(p, name):
        raise SchedulingError(f"{prim}: name '{name}' is already in use")
    return name


def _used(p, name):
    from ..ir import stmts_names

    return name in stmts_names(p.body)


def expr_arg(e, prim, what="expression"):
    if isinstance(e, Expr):
        return e
    if isinstance(e, bool):
        raise SchedulingError(f"{prim}: bad {what} {e!r}")
    if isinstance(e, int):
        from ..ir import lit

        return lit(e)
    if isinstance(e, str):
        from ..errors import ParseError
        from ..parser import parse_expr

        try:
            return parse_expr(e)
        except ParseError as err:
            raise SchedulingError(f"{prim}: cannot parse {what} '{e}': {err}") from None
    raise SchedulingError(f"{prim}: bad {what} {e!r}")


def int_arg(v, prim, what="value", positive=True):
    if isinstance(v, bool) or not isinstance(v, int):
        try:
            v2 = int(v)
        except (TypeError, ValueError):
            raise SchedulingError(f"{prim}: {what} must be an integer, got {v!r}") from None
        if v2 != v:
            raise SchedulingError(f"{prim}: {what} must be an integer, got {v!r}")
        v = v2
    if positive and v <= 0:
        raise SchedulingError(f"{prim}: {what} must be positive, got {v}")
    return v


def require(facts, pred, prim, what, cursor=None):
    """Prove `pred` under `facts` or raise SchedulingError with the trace."""
    if isinstance(pred, str):
        pred = expr_arg(pred, prim)
    res, text = explain(facts, pred)
    if res != VALID:
        err = SchedulingError(f"{prim}: cannot prove {what}: {print_expr(pred)}", cursor, print_expr(pred))
        err.explanation = text
        raise err


def require_no_conflict(facts, A, B, ren_a, ren_b, relation, prim, what, cursor=None, reduce_commutes=True):
    trace = []
    if may_conflict(facts, A, B, ren_a, ren_b, relation, reduce_commutes=reduce_commutes, trace=trace):
        err = SchedulingError(f"{prim}: {what}", cursor, what)
        err.explanation = "\n".join(trace)
        raise err


def stmt_facts(p, path):
    return facts_at(p, path)


def node_at(p, path):
    return get_at(p, path)


# --------------------------------------------------------------------------
# forwarding overrides


def _prefix_match(path, old):
    """Length matched by `old` (whose last element may be a bare label
    standing for any index under it), else -1."""
    n = len(old)
    if len(path) < n:
        return -1
    if n and isinstance(old[-1], str):
        if path[: n - 1] == old[:-1] and path[n - 1][0] == old[-1]:
            return n
        return -1
    return n if path[:n] == old else -1


def remap(data, table):
    """Rewrite a cursor by path-prefix substitution.

    `table` is a list of (old_prefix, new) pairs; the longest matching
    prefix wins.  A prefix may end in a bare label ("body",) meaning any
    index under that label; the matching new prefix then ends in the
    label to use, keeping the index.  `new` may also be None (invalidate)
    or ("block", block_path): an exact node match becomes that block and a
    gap anchored exactly there moves to the block's edge.  Returns None
    when nothing matched (defer to the atomic edits).
    """
    tag, path = data[0], data[1]
    best = None
    for old, new in table:
        n = _prefix_match(path, old)
        if n < 0 or (tag == "block" and len(path) == n and not isinstance(old[-1], str)):
            continue
        if best is None or n > best[2]:
            best = (old, new, n)
    if best is None:
        return None
    old, new, n = best
    if new is None:
        return False
    if new and new[0] == "block":
        if len(path) != n:
            return False
        bp = new[1]
        if tag == "node":
            return ("block", bp)
        if tag == "gap":
            *pp, (lab, (i, j)) = bp
            k = i if data[2] == "before" else j - 1
            return ("gap", tuple(pp) + ((lab, k),), data[2])
        return False
    new = tuple(new)
    if new and isinstance(new[-1], str):
        head = new[:-1] + ((new[-1], path[n - 1][1]),)
    else:
        head = new
    out = head + path[n:]
    if tag == "gap":
        return ("gap", out, data[2])
    return (tag, out)


def checked(override, holder):
    """Wrap an override so results that don't resolve in the final tree
    are dropped (invalidated) instead of raising later."""

    def fn(data):
        r = override(data)
        if r is None or r is False:
            return r
        root = holder.get("p")
        if root is None or _resolves(root, r):
            return r
        return False

    return fn


def _resolves(root, data):
    try:
        if data[0] == "node":
            get_at(root, data[1])
        elif data[0] == "block":
            from ..ir import get_block

            *pp, (lab, (i, j)) = data[1]
            n = len(get_block(root, tuple(pp), lab))
            if not 0 <= i < j <= n:
                return False
        else:
            get_at(root, data[1])
    except (KeyError, IndexError, AttributeError, TypeError, ValueError):
        return False
    return True


def finish(ed, prim, table_fn=None, **changes):
    """Finish an Editor with an optional prefix-remap override."""
    holder = {}
    override = None
    if table_fn is not None:
        override = checked(table_fn if callable(table_fn) else (lambda d: remap(d, table_fn)), holder)
    new = ed.finish(override=override, label=prim, **changes)
    holder["p"] = new
    return new


__all__ = [
    "cursor_arg",
    "buffer_arg",
    "fresh_ident",
    "expr_arg",
    "int_arg",
    "require",
    "require_no_conflict",
    "remap",
    "finish",
    "InvalidCursorError",
]


def index_scope(p, path):
    """Index names visible at `path`: size parameters and loop iterators."""
    from ..ir import For

    names = {a.name for a in p.args if a.is_size}
    node = p
    for lab, idx in path:
        if isinstance(node, For) and lab == "body":
            names.add(node.iter)
        node = get_at(node, ((lab, idx),))
    return names


def index_expr_arg(p, path, e, prim, what="index expression"):
    """Parse `e` and check it is an affine index expression in scope."""
    from ..analysis import normalize
    from ..ir import expr_names

    e = expr_arg(e, prim, what)
    bad = sorted(expr_names(e) - index_scope(p, path))
    if bad:
        raise SchedulingError(f"{prim}: {what} uses names not in scope: {', '.join(bad)}")
    if normalize(e) is None:
        raise SchedulingError(f"{prim}: {what} '{print_expr(e)}' is not affine")
    return e


def is_bool_expr(e):
    from ..ir import BinOp, CMP_OPS, BOOL_OPS

    if isinstance(e, BinOp):
        if e.op in CMP_OPS:
            return True
        if e.op in BOOL_OPS:
            return is_bool_expr(e.lhs) and is_bool_expr(e.rhs)
    return False


def first_names(e):
    """Bare names in `e` in order of first appearance."""
    from ..ir import Read, walk_expr

    seen = []
    for n in walk_expr(e):
        if isinstance(n, Read) and not n.idx and n.name not in seen:
            seen.append(n.name)
    return seen


def simplify_var_uses(s, var):
    """Normalize every index expression in statement `s` that mentions `var`."""
    from dataclasses import replace

    from ..analysis import simplify_index
    from ..ir import (
        Alloc, Assign, BinOp, CMP_OPS, For, If, Interval, Read, Reduce, WindowExpr,
        expr_names, map_expr, map_stmt_exprs,
    )

    def simp(i):
        if var in expr_names(i) and not isinstance(i, Interval):
            return simplify_index(i, order=first_names(i))
        return i

    def node(n):
        if isinstance(n, Read) and n.idx:
            return replace(n, idx=tuple(simp(i) for i in n.idx))
        if isinstance(n, Interval):
            return Interval(simp(n.lo), simp(n.hi))
        if isinstance(n, WindowExpr):
            return replace(n, idx=tuple(simp(i) for i in n.idx))
        if isinstance(n, BinOp) and n.op in CMP_OPS:
            return BinOp(n.op, simp(n.lhs), simp(n.rhs))
        return None

    s = map_stmt_exprs(s, lambda e: map_expr(e, node))

    def top(x):
        if isinstance(x, (Assign, Reduce)):
            return replace(x, idx=tuple(simp(i) for i in x.idx))
        if isinstance(x, For):
            return replace(x, lo=simp(x.lo), hi=simp(x.hi), body=tuple(top(b) for b in x.body))
        if isinstance(x, If):
            return replace(x, body=tuple(top(b) for b in x.body), orelse=tuple(top(b) for b in x.orelse))
        if isinstance(x, Alloc):
            return replace(x, dims=tuple(simp(d) for d in x.dims))
        return x

    return top(s)
