"""Higher-order scheduling combinators and traversal strategies.

An "op hat" has the shape ``(p, c, *args) -> (p, c)``.  ``lift`` turns a
plain primitive ``(p, c, *args) -> p`` into one.
"""

from ..cursors import BlockCursor, ForCursor, IfCursor
from ..errors import InvalidCursorError, SchedulingError
from ..primitives import fission, remove_loop, reorder_stmts

# the only errors a combinator treats as "this op does not apply"
RECOVERABLE = (SchedulingError, InvalidCursorError)


def lift(op):
    def func(p, c, *args):
        return op(p, c, *args), c

    func.__name__ = f"lift({getattr(op, '__name__', 'op')})"
    return func


def seq_ops(*ops):
    def func(p, c, *args):
        for op in ops:
            p, c = op(p, c, *args)
        return p, c

    return func


def repeat_op(op, limit=10_000):
    """Apply `op` until it raises.  `limit` guards against ops that never
    fail."""

    def func(p, c, *args):
        for _ in range(limit):
            try:
                p, c = op(p, c, *args)
            except RECOVERABLE:
                return p, c
        raise SchedulingError(f"repeat_op: no fixpoint after {limit} steps")

    return func


def try_else(op, opelse):
    def func(p, c, *args):
        try:
            return op(p, c, *args)
        except RECOVERABLE:
            return opelse(p, c, *args)

    return func


def identity(p, c, *args):
    return p, c


def reduce_over(op, top):
    """Apply `op` to every cursor produced by traversal `top`."""

    def func(p, cur, *args):
        c = cur
        for c in list(top(cur)):
            p, c = op(p, c, *args)
        return p, c

    return func


# --------------------------------------------------------------------------
# reference frames


def nav(move):
    """Forward the cursor to the current procedure, then move it."""

    def func(p, c, *args):
        return p, move(p.forward(c))

    return func


def savec(op):
    """Run `op` but hand back the cursor we started with."""

    def func(p, c, *args):
        return op(p, c, *args)[0], c

    return func


def reframe(move, op):
    return savec(seq_ops(nav(move), op))


reorder_before = reframe(lambda c: c.expand(1, 0), lift(reorder_stmts))
remove_parent_loop = reframe(lambda c: c.parent(), lift(remove_loop))
fission_after = reframe(lambda c: c.after(), lift(fission))

hoist = repeat_op(try_else(seq_ops(fission_after, remove_parent_loop), reorder_before))


def hoist_stmt(p, stmt):
    """Move a statement as far up and out as the safety checks allow."""
    if isinstance(stmt, str):
        stmt = p.find(stmt)
    return hoist(p, stmt)[0]


# --------------------------------------------------------------------------
# traversals: Cursor -> iterator of cursors


def _children(c):
    if isinstance(c, BlockCursor):
        yield from c
        return
    yield from c.body()
    if isinstance(c, IfCursor) and c.node().orelse:
        yield from c.orelse()


def lrn(c):
    """Postorder: every descendant statement, children before parents."""
    for d in _children(c):
        if isinstance(d, (ForCursor, IfCursor)):
            yield from lrn(d)
        yield d


def preorder(c):
    for d in _children(c):
        yield d
        if isinstance(d, (ForCursor, IfCursor)):
            yield from preorder(d)


def innermost(c):
    """Loops that contain no further loops."""
    for d in lrn(c):
        if isinstance(d, ForCursor) and not any(isinstance(x, ForCursor) for x in lrn(d)):
            yield d


def loops(top):
    """Restrict a traversal to loops."""

    def func(c):
        return (d for d in top(c) if isinstance(d, ForCursor))

    return func
