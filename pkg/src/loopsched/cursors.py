"""Cursors: stable references into a specific procedure version.

A cursor pairs a procedure version with a location: a node (statement or
expression), a gap before/after a statement, or a contiguous block of
statements.  Navigation always happens in the cursor's own version; to
use an old cursor on a newer procedure, forward it first (primitives do
this implicitly).
"""

from .edits import Trace  # noqa: F401  (re-exported for convenience)
from .errors import InternalError, InvalidCursorError, NotFoundError, ProvenanceError
from .ir import (
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    Expr,
    For,
    Hole,
    If,
    Interval,
    Pass,
    Procedure,
    Read,
    Reduce,
    Stmt,
    StmtHole,
    USub,
    WindowExpr,
    child_spec,
    get_at,
    get_block,
    walk_paths,
)


class Cursor:
    kind = "cursor"
    __slots__ = ("proc",)

    def __init__(self, proc):
        self.proc = proc

    def data(self):
        raise NotImplementedError

    def __eq__(self, other):
        return (
            isinstance(other, Cursor)
            and self.proc is other.proc
            and self.data() == other.data()
        )

    def __hash__(self):
        return hash((self.proc.version, self.data()))

    def is_invalid(self):
        return False

    def is_valid(self):
        return not self.is_invalid()

    def forward_to(self, p):
        return forward(p, self)

    def _invalid(self, why):
        raise InvalidCursorError(why, self)

    def find(self, pattern, many=False):
        return find_all(self, pattern) if many else find(self, pattern)

    def find_loop(self, name, many=False):
        return find_loop(self, name, many=many)

    def dump(self):
        return dump_cursor(self)


class InvalidCursor(Cursor):
    kind = "invalid"
    __slots__ = ()

    def data(self):
        return None

    def is_invalid(self):
        return True

    def node(self):
        self._invalid("cursor was invalidated by a rewrite")

    def __getattr__(self, name):
        if name.startswith("__"):
            raise AttributeError(name)

        def fail(*a, **k):
            raise InvalidCursorError(f"cannot call {name}() on an invalidated cursor", self)

        return fail

    def __repr__(self):
        return f"<InvalidCursor v{self.proc.version}>"


# --------------------------------------------------------------------------
# node cursors


class NodeCursor(Cursor):
    kind = "node"
    __slots__ = ("path",)

    def __init__(self, proc, path):
        super().__init__(proc)
        self.path = tuple(path)

    def data(self):
        return ("node", self.path)

    def __repr__(self):
        from .errors import format_path

        return f"<{type(self).__name__} v{self.proc.version} {format_path(self.path)}>"

    def node(self):
        return get_at(self.proc, self.path)

    def is_stmt(self):
        return isinstance(self.node(), Stmt)

    def is_expr(self):
        return isinstance(self.node(), Expr)

    # position in the enclosing list -----------------------------------
    def _list_step(self):
        if not self.path or not isinstance(self.path[-1][1], int):
            return None
        return self.path[-1]

    def stmt_loc(self):
        """((parent_path, label), index) for a statement cursor."""
        if not self.is_stmt():
            self._invalid("not a statement")
        lab, k = self.path[-1]
        return (self.path[:-1], lab), k

    # navigation ----------------------------------------------------------
    def parent(self):
        if len(self.path) <= 1:
            self._invalid("parent() of a top-level statement")
        return make_node_cursor(self.proc, self.path[:-1])

    def _sibling(self, delta):
        if not self.is_stmt():
            self._invalid("next()/prev() need a statement cursor")
        (pp, lab), k = self.stmt_loc()
        lst = get_block(self.proc, pp, lab)
        j = k + delta
        if not 0 <= j < len(lst):
            self._invalid("no statement there")
        return make_node_cursor(self.proc, pp + ((lab, j),))

    def next(self, dist=1):
        return self._sibling(dist)

    def prev(self, dist=1):
        return self._sibling(-dist)

    def before(self):
        if not self.is_stmt():
            self._invalid("before() needs a statement cursor")
        return GapCursor(self.proc, self.path, "before")

    def after(self):
        if not self.is_stmt():
            self._invalid("after() needs a statement cursor")
        return GapCursor(self.proc, self.path, "after")

    def as_block(self):
        (pp, lab), k = self.stmt_loc()
        return BlockCursor(self.proc, pp, lab, (k, k + 1))

    def expand(self, nbefore=0, nafter=0):
        return self.as_block().expand(nbefore, nafter)

    def child(self, label, idx=None):
        node = self.node()
        try:
            attr, is_list = child_spec(node, label)
        except KeyError:
            self._invalid(f"{type(node).__name__} has no '{label}'")
        if is_list and idx is None:
            self._invalid(f"'{label}' needs an index")
        if is_list:
            n = len(getattr(node, attr))
            if not 0 <= idx < n:
                self._invalid(f"'{label}' index {idx} out of range")
        return make_node_cursor(self.proc, self.path + ((label, idx if is_list else None),))

    def lo(self):
        return self.child("lo")

    def hi(self):
        return self.child("hi")

    def cond(self):
        return self.child("cond")

    def rhs(self):
        return self.child("rhs")

    def lhs(self):
        return self.child("lhs")

    def idx(self, k=None):
        if k is None:
            return [self.child("idx", i) for i in range(len(self.node().idx))]
        return self.child("idx", k)

    def arg(self, k):
        return self.child("arg", k)

    def args(self):
        return [self.child("arg", i) for i in range(len(self.node().args))]

    def _list(self, label):
        node = self.node()
        try:
            attr, is_list = child_spec(node, label)
        except KeyError:
            self._invalid(f"{type(node).__name__} has no '{label}' block")
        lst = getattr(node, attr)
        if not lst:
            self._invalid(f"empty '{label}' block")
        return BlockCursor(self.proc, self.path, label, (0, len(lst)))

    def body(self):
        return self._list("body")

    def orelse(self):
        return self._list("orelse")

    # inspection ----------------------------------------------------------
    def name(self):
        n = self.node()
        for attr in ("iter", "name"):
            if hasattr(n, attr):
                return getattr(n, attr)
        if isinstance(n, Call):
            return n.proc.name
        self._invalid(f"{type(n).__name__} has no name")

    def loops_above(self):
        """Cursors of all enclosing loops, outermost first."""
        out = []
        for d in range(1, len(self.path)):
            n = get_at(self.proc, self.path[:d])
            if isinstance(n, For):
                out.append(make_node_cursor(self.proc, self.path[:d]))
        return out

    def enclosing_stmt(self):
        path = self.path
        while path and not isinstance(get_at(self.proc, path), Stmt):
            path = path[:-1]
        return make_node_cursor(self.proc, path)


class StmtCursor(NodeCursor):
    __slots__ = ()


class ForCursor(StmtCursor):
    __slots__ = ()


class IfCursor(StmtCursor):
    __slots__ = ()


class AssignCursor(StmtCursor):
    __slots__ = ()


class ReduceCursor(StmtCursor):
    __slots__ = ()


class AllocCursor(StmtCursor):
    __slots__ = ()


class PassCursor(StmtCursor):
    __slots__ = ()


class CallCursor(StmtCursor):
    __slots__ = ()


class ExprCursor(NodeCursor):
    __slots__ = ()


_NODE_CLASSES = {
    For: ForCursor,
    If: IfCursor,
    Assign: AssignCursor,
    Reduce: ReduceCursor,
    Alloc: AllocCursor,
    Pass: PassCursor,
    Call: CallCursor,
}


def make_node_cursor(proc, path):
    if not path:
        raise InvalidCursorError("the procedure itself is not a cursor target")
    try:
        n = get_at(proc, path)
    except (KeyError, IndexError, AttributeError):
        raise InvalidCursorError(f"path does not resolve in '{proc.name}'") from None
    cls = _NODE_CLASSES.get(type(n), ExprCursor if isinstance(n, Expr) else NodeCursor)
    return cls(proc, path)


# --------------------------------------------------------------------------
# gaps and blocks


class GapCursor(Cursor):
    kind = "gap"
    __slots__ = ("anchor_path", "side")

    def __init__(self, proc, anchor_path, side):
        super().__init__(proc)
        if side not in ("before", "after"):
            raise InternalError(f"bad gap side {side!r}")
        self.anchor_path = tuple(anchor_path)
        self.side = side

    def data(self):
        return ("gap", self.anchor_path, self.side)

    def __repr__(self):
        from .errors import format_path

        return f"<GapCursor v{self.proc.version} {self.side} {format_path(self.anchor_path)}>"

    def anchor(self):
        return make_node_cursor(self.proc, self.anchor_path)

    def position(self):
        """((parent_path, label), insertion index)."""
        *pp, (lab, k) = self.anchor_path
        return (tuple(pp), lab), (k if self.side == "before" else k + 1)

    def parent(self):
        return self.anchor().parent()

    def next(self):
        (pp, lab), g = self.position()
        if g >= len(get_block(self.proc, pp, lab)):
            self._invalid("no statement after this gap")
        return make_node_cursor(self.proc, pp + ((lab, g),))

    def prev(self):
        (pp, lab), g = self.position()
        if g == 0:
            self._invalid("no statement before this gap")
        return make_node_cursor(self.proc, pp + ((lab, g - 1),))

    def node(self):
        self._invalid("a gap has no node")


class BlockCursor(Cursor):
    kind = "block"
    __slots__ = ("parent_path", "label", "rng")

    def __init__(self, proc, parent_path, label, rng):
        super().__init__(proc)
        self.parent_path = tuple(parent_path)
        self.label = label
        self.rng = (int(rng[0]), int(rng[1]))
        if not 0 <= self.rng[0] < self.rng[1]:
            raise InvalidCursorError(f"bad block range {self.rng}")

    @property
    def path(self):
        return self.parent_path + ((self.label, self.rng),)

    @property
    def loc(self):
        return (self.parent_path, self.label)

    def data(self):
        return ("block", self.path)

    def __repr__(self):
        from .errors import format_path

        return f"<BlockCursor v{self.proc.version} {format_path(self.path)}>"

    def stmts(self):
        lst = get_block(self.proc, self.parent_path, self.label)
        i, j = self.rng
        if j > len(lst):
            self._invalid("block range exceeds its list")
        return lst[i:j]

    node = stmts

    def __len__(self):
        return self.rng[1] - self.rng[0]

    def __iter__(self):
        for k in range(*self.rng):
            yield make_node_cursor(self.proc, self.parent_path + ((self.label, k),))

    def __getitem__(self, k):
        n = len(self)
        if isinstance(k, slice):
            start, stop, step = k.indices(n)
            if step != 1 or start >= stop:
                self._invalid("block slices must be non-empty and contiguous")
            i0 = self.rng[0]
            return BlockCursor(self.proc, self.parent_path, self.label, (i0 + start, i0 + stop))
        if k < 0:
            k += n
        if not 0 <= k < n:
            self._invalid(f"block index {k} out of range")
        return make_node_cursor(self.proc, self.parent_path + ((self.label, self.rng[0] + k),))

    def parent(self):
        if not self.parent_path:
            self._invalid("parent() of the top-level block")
        return make_node_cursor(self.proc, self.parent_path)

    def before(self):
        return GapCursor(self.proc, self.parent_path + ((self.label, self.rng[0]),), "before")

    def after(self):
        return GapCursor(self.proc, self.parent_path + ((self.label, self.rng[1] - 1),), "after")

    def expand(self, nbefore=0, nafter=0):
        n = len(get_block(self.proc, self.parent_path, self.label))
        i, j = self.rng[0] - nbefore, self.rng[1] + nafter
        if i < 0 or j > n:
            self._invalid("expand() ran past the enclosing block")
        return BlockCursor(self.proc, self.parent_path, self.label, (i, j))

    def next(self):
        return self[-1].next()

    def prev(self):
        return self[0].prev()

    def first(self):
        return self[0]

    def last(self):
        return self[-1]


def cursor_from_data(proc, data):
    if data is None:
        return InvalidCursor(proc)
    tag = data[0]
    try:
        if tag == "node":
            return make_node_cursor(proc, data[1])
        if tag == "block":
            *pp, (lab, rng) = data[1]
            c = BlockCursor(proc, tuple(pp), lab, rng)
            c.stmts()
            return c
        if tag == "gap":
            c = GapCursor(proc, data[1], data[2])
            c.anchor()
            return c
    except InvalidCursorError as e:
        raise InternalError(f"forwarding produced an unresolvable location {data!r}: {e}") from None
    raise InternalError(f"bad cursor data {data!r}")


# --------------------------------------------------------------------------
# forwarding


def provenance_chain(p, ancestor):
    """Versions strictly after `ancestor` up to and including `p`, oldest first."""
    chain = []
    q = p
    while q is not None and q is not ancestor:
        chain.append(q)
        q = q.parent
    if q is None:
        return None
    chain.reverse()
    return chain


def forward(p, c):
    """Map cursor `c` (made on an ancestor of `p`) into `p`."""
    if c.proc is p:
        return c
    chain = provenance_chain(p, c.proc)
    if chain is None:
        raise ProvenanceError(
            f"cursor's procedure (v{c.proc.version}) is not an ancestor of '{p.name}' (v{p.version})", c
        )
    data = c.data()
    for q in chain:
        if data is None:
            break
        if q.trace is not None:
            data = q.trace.fwd(data)
    return cursor_from_data(p, data)


def resolve(p, c):
    """Forward `c` into `p` and return it; raises if it was invalidated."""
    fc = forward(p, c)
    if fc.is_invalid():
        raise InvalidCursorError("cursor was invalidated by a rewrite", c)
    return fc


# --------------------------------------------------------------------------
# pattern matching


def match_expr(pat, e):
    if isinstance(pat, Hole):
        return isinstance(e, Expr)
    if type(pat) is not type(e):
        return False
    if isinstance(pat, Const):
        return pat.val == e.val
    if isinstance(pat, (Read, WindowExpr)):
        return pat.name == e.name and _match_list(pat.idx, e.idx, match_expr)
    if isinstance(pat, BinOp):
        return pat.op == e.op and match_expr(pat.lhs, e.lhs) and match_expr(pat.rhs, e.rhs)
    if isinstance(pat, USub):
        return match_expr(pat.arg, e.arg)
    if isinstance(pat, Interval):
        return match_expr(pat.lo, e.lo) and match_expr(pat.hi, e.hi)
    return pat == e


def _match_list(pats, items, fn):
    if len(pats) == 1 and isinstance(pats[0], (Hole, StmtHole)):
        # a lone wildcard stands for any non-empty list
        return bool(items)
    if len(pats) != len(items):
        return False
    return all(fn(a, b) for a, b in zip(pats, items))


def match_stmt(pat, s):
    if isinstance(pat, StmtHole):
        return isinstance(s, Stmt)
    if type(pat) is not type(s):
        return False
    if isinstance(pat, For):
        return (
            pat.iter in ("_", s.iter)
            and match_expr(pat.lo, s.lo)
            and match_expr(pat.hi, s.hi)
            and _match_list(pat.body, s.body, match_stmt)
        )
    if isinstance(pat, If):
        return (
            match_expr(pat.cond, s.cond)
            and _match_list(pat.body, s.body, match_stmt)
            and (not pat.orelse or _match_list(pat.orelse, s.orelse, match_stmt))
        )
    if isinstance(pat, (Assign, Reduce)):
        return pat.name == s.name and _match_list(pat.idx, s.idx, match_expr) and match_expr(pat.rhs, s.rhs)
    if isinstance(pat, Alloc):
        if pat.name != s.name:
            return False
        if pat.typ == "_":
            return True
        return pat.typ == s.typ and _match_list(pat.dims, s.dims, match_expr)
    if isinstance(pat, Pass):
        return True
    if isinstance(pat, Call):
        return pat.proc.name == s.proc.name and _match_list(pat.args, s.args, match_expr)
    return False


def _scope_roots(scope):
    """(proc, [(path, node)]) roots to search under."""
    if isinstance(scope, Procedure):
        return scope, [((), scope)]
    if isinstance(scope, BlockCursor):
        return scope.proc, [(c.path, c.node()) for c in scope]
    if isinstance(scope, NodeCursor):
        return scope.proc, [(scope.path, scope.node())]
    if isinstance(scope, GapCursor):
        raise InvalidCursorError("cannot search inside a gap", scope)
    raise InvalidCursorError("cannot search an invalidated cursor", scope)


def _parse(pattern, proc):
    from .parser import parse_pattern

    if isinstance(pattern, str):
        return parse_pattern(pattern, _callees(proc))
    return pattern, None


def _callees(proc):
    from .ir import walk_stmts

    out = {}
    for s in walk_stmts(proc.body):
        if isinstance(s, Call):
            out[s.proc.name] = s.proc
    return out


def find_all(scope, pattern):
    proc, roots = _scope_roots(scope)
    pat, sel = _parse(pattern, proc)
    out = []
    if isinstance(pat, tuple):
        for root_path, root in roots:
            for path, node in walk_paths(root, root_path):
                for lab, attr, is_list in _list_slots(node):
                    lst = getattr(node, attr)
                    for i in range(len(lst) - len(pat) + 1):
                        if all(match_stmt(a, b) for a, b in zip(pat, lst[i : i + len(pat)])):
                            out.append(BlockCursor(proc, path, lab, (i, i + len(pat))))
        # preorder of the block's first statement
        order = {p: k for k, (p, _) in enumerate(walk_paths(proc))}
        out.sort(key=lambda c: order[c.parent_path + ((c.label, c.rng[0]),)])
    else:
        is_stmt = isinstance(pat, Stmt)
        for root_path, root in roots:
            for path, node in walk_paths(root, root_path):
                if not path:
                    continue
                if is_stmt:
                    if isinstance(node, Stmt) and match_stmt(pat, node):
                        out.append(make_node_cursor(proc, path))
                elif isinstance(node, Expr) and match_expr(pat, node):
                    out.append(make_node_cursor(proc, path))
    if sel is not None:
        return out[sel : sel + 1]
    return out


def _list_slots(node):
    from .ir import CHILDREN

    for lab, attr, is_list in CHILDREN[type(node)]:
        if is_list and lab in ("body", "orelse"):
            yield lab, attr, is_list


def find(scope, pattern):
    res = find_all(scope, pattern)
    if not res:
        raise NotFoundError(f"pattern {pattern if isinstance(pattern, str) else '<node>'!r} matched nothing")
    return res[0]


def find_loop(scope, name, many=False):
    from .parser import split_selector

    base, sel = split_selector(name)
    pat = f"for {base.strip()} in _: _"
    if sel is not None:
        pat += f" #{sel}"
    if many:
        return find_all(scope, pat)
    return find(scope, pat)


def navigate(c, move, *args):
    """Apply a named navigation move, e.g. navigate(c, "expand", 1, 0)."""
    fn = getattr(c, move, None)
    if fn is None or move.startswith("_"):
        raise InvalidCursorError(f"unknown navigation '{move}'", c)
    return fn(*args)


# --------------------------------------------------------------------------
# debug dump


def _stmt_extents(p):
    """Lines of the printed procedure plus {stmt path: (first, end)}."""
    from .printer import print_proc, _stmt_lines

    header = print_proc(p).splitlines()
    nhead = 1 + len(p.preds) + (1 if p.instr is not None else 0)
    lines = header[:nhead]
    ext = {}

    def visit(stmts, prefix, label, ind):
        for k, s in enumerate(stmts):
            path = prefix + ((label, k),)
            start = len(lines)
            if isinstance(s, For):
                lines.append(_stmt_lines(s, ind)[0])
                visit(s.body, path, "body", ind + 1)
            elif isinstance(s, If):
                lines.append(_stmt_lines(s, ind)[0])
                visit(s.body, path, "body", ind + 1)
                if s.orelse:
                    lines.append("  " * ind + "else:")
                    visit(s.orelse, path, "orelse", ind + 1)
            else:
                lines.extend(_stmt_lines(s, ind))
            ext[path] = (start, len(lines))

    visit(p.body, (), "body", 1)
    return lines, ext


def dump_cursor(c):
    """Procedure text with markers: `^` for a gap, `[ ]` around a block,
    `~` under a node."""
    from .printer import print_expr

    p = c.proc
    if c.is_invalid():
        return str(p) + "# <invalid cursor>\n"
    lines, ext = _stmt_extents(p)
    inserts = []  # (line index, text)

    def indent_of(i):
        s = lines[i]
        return len(s) - len(s.lstrip(" "))

    if isinstance(c, GapCursor):
        a, b = ext[c.anchor_path]
        at = a if c.side == "before" else b
        inserts.append((at, " " * indent_of(a) + "^"))
    elif isinstance(c, BlockCursor):
        first = ext[c.parent_path + ((c.label, c.rng[0]),)]
        last = ext[c.parent_path + ((c.label, c.rng[1] - 1),)]
        pad = " " * indent_of(first[0])
        inserts.append((first[0], pad + "["))
        inserts.append((last[1], pad + "]"))
    else:
        node = c.node()
        spath = c.path
        while spath not in ext:
            spath = spath[:-1]
        a, _ = ext[spath]
        line = lines[a]
        if isinstance(node, Stmt):
            ind = indent_of(a)
            inserts.append((a + 1, " " * ind + "~" * (len(line) - ind)))
        else:
            text = print_expr(node)
            col = line.find(text, indent_of(a))
            if col < 0:
                col, text = indent_of(a), line.strip()
            inserts.append((a + 1, " " * col + "~" * len(text)))
    for at, text in sorted(inserts, key=lambda t: -t[0]):
        lines.insert(at, text)
    return "\n".join(lines) + "\n"
