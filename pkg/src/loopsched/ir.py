"""Object-language AST.

All nodes are frozen dataclasses built from tuples, so every value is
immutable and structurally comparable.  Children are addressed by
(label, index) steps; `CHILDREN` is the single table describing which
labels each node class exposes.
"""

import itertools
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Optional

NUMERIC_TYPES = ("f32", "f64", "i8", "i32")
INDEX_TYPES = ("size", "index")
DEFAULT_MEM = "DRAM"


# --------------------------------------------------------------------------
# expressions


class Node:
    __slots__ = ()


class Expr(Node):
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    val: Fraction
    real: bool = False  # written with a decimal point

    def __post_init__(self):
        if not isinstance(self.val, Fraction):
            object.__setattr__(self, "val", Fraction(self.val))


@dataclass(frozen=True)
class Read(Expr):
    name: str
    idx: tuple = ()


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class USub(Expr):
    arg: Expr


@dataclass(frozen=True)
class Interval(Expr):
    lo: Expr
    hi: Expr


@dataclass(frozen=True)
class WindowExpr(Expr):
    """`name[lo:hi, pt, ...]`; only legal as a call argument."""

    name: str
    idx: tuple


@dataclass(frozen=True)
class Hole(Expr):
    """Pattern wildcard `_`; never appears in a real procedure."""


ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or")


# --------------------------------------------------------------------------
# statements


class Stmt(Node):
    __slots__ = ()


@dataclass(frozen=True)
class For(Stmt):
    iter: str
    lo: Expr
    hi: Expr
    body: tuple
    parallel: bool = False


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    body: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class Assign(Stmt):
    name: str
    idx: tuple
    rhs: Expr


@dataclass(frozen=True)
class Reduce(Stmt):
    name: str
    idx: tuple
    rhs: Expr


@dataclass(frozen=True)
class Alloc(Stmt):
    name: str
    typ: str
    dims: tuple = ()
    mem: str = DEFAULT_MEM


@dataclass(frozen=True)
class Pass(Stmt):
    pass


@dataclass(frozen=True)
class Call(Stmt):
    proc: "Procedure"
    args: tuple


@dataclass(frozen=True)
class StmtHole(Stmt):
    """Pattern wildcard standing for one statement (or a whole body)."""


# --------------------------------------------------------------------------
# procedures

_versions = itertools.count(1)


@dataclass(frozen=True)
class FnArg:
    name: str
    typ: str
    dims: tuple = ()
    mem: Optional[str] = None

    @property
    def is_size(self):
        return self.typ in INDEX_TYPES

    @property
    def is_numeric(self):
        return self.typ in NUMERIC_TYPES


@dataclass(frozen=True, eq=False)
class Procedure:
    """An immutable procedure version.

    `parent` and `trace` link a scheduled version to the version it was
    derived from; they take no part in equality.
    """

    name: str
    args: tuple
    preds: tuple
    body: tuple
    instr: Optional[str] = None
    parent: Optional["Procedure"] = field(default=None, repr=False)
    trace: Optional[object] = field(default=None, repr=False)
    version: int = field(default_factory=lambda: next(_versions), repr=False)

    # structural identity ignores provenance
    def _key(self):
        return (self.name, self.args, self.preds, self.body, self.instr)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Procedure):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash(self._key())
            object.__setattr__(self, "_hash", h)
        return h

    def __str__(self):
        from .printer import print_proc

        return print_proc(self)

    # -- convenience API, mirrors the module-level functions -------------
    def arg(self, name):
        for a in self.args:
            if a.name == name:
                return a
        raise KeyError(name)

    def is_instr(self):
        return self.instr is not None

    def root(self):
        p = self
        while p.parent is not None:
            p = p.parent
        return p

    def body_cursor(self):
        from .cursors import BlockCursor

        return BlockCursor(self, (), "body", (0, len(self.body)))

    def find(self, pattern, many=False):
        from .cursors import find, find_all

        return find_all(self, pattern) if many else find(self, pattern)

    def find_loop(self, name, many=False):
        from .cursors import find_loop

        return find_loop(self, name, many=many)

    def find_alloc(self, name):
        from .cursors import find

        return find(self, f"{name} : _")

    def forward(self, cur):
        from .cursors import forward

        return forward(self, cur)

    def partial_eval(self, *args, **kwargs):
        from .procs import partial_eval

        return partial_eval(self, *args, **kwargs)

    def add_assertion(self, pred):
        from .procs import add_assertion

        return add_assertion(self, pred)

    def rename(self, name):
        from .procs import rename

        return rename(self, name)


# --------------------------------------------------------------------------
# child table

# class -> tuple of (label, attribute, is_list)
CHILDREN = {
    Const: (),
    Read: (("idx", "idx", True),),
    BinOp: (("lhs", "lhs", False), ("rhs", "rhs", False)),
    USub: (("arg", "arg", False),),
    Interval: (("lo", "lo", False), ("hi", "hi", False)),
    WindowExpr: (("idx", "idx", True),),
    Hole: (),
    For: (("lo", "lo", False), ("hi", "hi", False), ("body", "body", True)),
    If: (("cond", "cond", False), ("body", "body", True), ("orelse", "orelse", True)),
    Assign: (("idx", "idx", True), ("rhs", "rhs", False)),
    Reduce: (("idx", "idx", True), ("rhs", "rhs", False)),
    Alloc: (("dims", "dims", True),),
    Pass: (),
    Call: (("arg", "args", True),),
    StmtHole: (),
    Procedure: (("body", "body", True),),
}

BLOCK_LABELS = ("body", "orelse")


def child_spec(node, label):
    for lab, attr, is_list in CHILDREN[type(node)]:
        if lab == label:
            return attr, is_list
    raise KeyError(f"{type(node).__name__} has no child {label!r}")


def get_child(node, label, idx=None):
    attr, is_list = child_spec(node, label)
    val = getattr(node, attr)
    if is_list:
        if idx is None:
            return val
        if not 0 <= idx < len(val):
            raise IndexError(idx)
        return val[idx]
    return val


def with_child(node, label, idx, new):
    attr, is_list = child_spec(node, label)
    if is_list and idx is not None:
        lst = list(getattr(node, attr))
        lst[idx] = new
        new = tuple(lst)
    return _rebuild(node, **{attr: new})


def with_list(node, label, items):
    attr, is_list = child_spec(node, label)
    assert is_list
    return _rebuild(node, **{attr: tuple(items)})


def _rebuild(node, **changes):
    if isinstance(node, Procedure):
        # a fresh version with the same provenance-free content
        return Procedure(
            changes.get("name", node.name),
            changes.get("args", node.args),
            changes.get("preds", node.preds),
            changes.get("body", node.body),
            changes.get("instr", node.instr),
        )
    return replace(node, **changes)


def children(node):
    """Yield (label, idx, child) for every child of `node`, in order."""
    for lab, attr, is_list in CHILDREN[type(node)]:
        val = getattr(node, attr)
        if is_list:
            for i, c in enumerate(val):
                yield lab, i, c
        else:
            yield lab, None, val


def get_at(root, path):
    node = root
    for label, idx in path:
        node = get_child(node, label, idx)
    return node


def set_at(root, path, new):
    if not path:
        return new
    (label, idx), rest = path[0], path[1:]
    child = get_child(root, label, idx)
    return with_child(root, label, idx, set_at(child, rest, new))


def get_block(root, block_path, label):
    return get_child(get_at(root, block_path), label)


def set_block(root, block_path, label, items):
    parent = get_at(root, block_path)
    return set_at(root, block_path, with_list(parent, label, items))


def map_expr(e, fn):
    """Bottom-up rebuild: children first, then `fn(node)` (None keeps node)."""
    new_kids = {}
    changed = False
    for lab, attr, is_list in CHILDREN[type(e)]:
        val = getattr(e, attr)
        if is_list:
            nv = tuple(map_expr(c, fn) for c in val)
            if any(a is not b for a, b in zip(nv, val)):
                changed = True
                new_kids[attr] = nv
        else:
            nv = map_expr(val, fn)
            if nv is not val:
                changed = True
                new_kids[attr] = nv
    if changed:
        e = replace(e, **new_kids)
    r = fn(e)
    return e if r is None else r


def walk_expr(e):
    yield e
    for _, _, c in children(e):
        yield from walk_expr(c)


def walk_stmts(stmts):
    for s in stmts:
        yield s
        if isinstance(s, For):
            yield from walk_stmts(s.body)
        elif isinstance(s, If):
            yield from walk_stmts(s.body)
            yield from walk_stmts(s.orelse)


def stmt_exprs(s):
    """Direct expression children of a statement."""
    if isinstance(s, For):
        return [s.lo, s.hi]
    if isinstance(s, If):
        return [s.cond]
    if isinstance(s, (Assign, Reduce)):
        return list(s.idx) + [s.rhs]
    if isinstance(s, Alloc):
        return list(s.dims)
    if isinstance(s, Call):
        return list(s.args)
    return []


def expr_names(e):
    """Every name read by `e` (variables and buffers, windows included)."""
    out = set()
    for n in walk_expr(e):
        if isinstance(n, (Read, WindowExpr)):
            out.add(n.name)
    return out


def stmts_names(stmts):
    out = set()
    for s in walk_stmts(stmts):
        for e in stmt_exprs(s):
            out |= expr_names(e)
        if isinstance(s, (Assign, Reduce)):
            out.add(s.name)
    return out


def subst(e, mapping):
    """Replace reads of bare names by expressions."""
    if not mapping:
        return e

    def fn(n):
        if isinstance(n, Read) and not n.idx and n.name in mapping:
            return mapping[n.name]
        return None

    return map_expr(e, fn)


def subst_stmt(s, mapping):
    return map_stmt_exprs(s, lambda e: subst(e, mapping))


def map_stmt_exprs(s, fn):
    """Apply `fn` to every expression slot of `s`, recursively into bodies."""
    if isinstance(s, For):
        return replace(s, lo=fn(s.lo), hi=fn(s.hi), body=tuple(map_stmt_exprs(b, fn) for b in s.body))
    if isinstance(s, If):
        return replace(
            s,
            cond=fn(s.cond),
            body=tuple(map_stmt_exprs(b, fn) for b in s.body),
            orelse=tuple(map_stmt_exprs(b, fn) for b in s.orelse),
        )
    if isinstance(s, (Assign, Reduce)):
        return replace(s, idx=tuple(fn(i) for i in s.idx), rhs=fn(s.rhs))
    if isinstance(s, Alloc):
        return replace(s, dims=tuple(fn(d) for d in s.dims))
    if isinstance(s, Call):
        return replace(s, args=tuple(fn(a) for a in s.args))
    return s


def rename_buffer(s, old, new):
    """Rename every use of buffer/variable `old` inside statement `s`."""

    def fn(n):
        if isinstance(n, Read) and n.name == old:
            return replace(n, name=new)
        if isinstance(n, WindowExpr) and n.name == old:
            return replace(n, name=new)
        return None

    s = map_stmt_exprs(s, lambda e: map_expr(e, fn))
    return _rename_stmt_names(s, old, new)


def _rename_stmt_names(s, old, new):
    if isinstance(s, (Assign, Reduce)) and s.name == old:
        s = replace(s, name=new)
    if isinstance(s, Alloc) and s.name == old:
        s = replace(s, name=new)
    if isinstance(s, For):
        if s.iter == old:
            s = replace(s, iter=new)
        s = replace(s, body=tuple(_rename_stmt_names(b, old, new) for b in s.body))
    if isinstance(s, If):
        s = replace(
            s,
            body=tuple(_rename_stmt_names(b, old, new) for b in s.body),
            orelse=tuple(_rename_stmt_names(b, old, new) for b in s.orelse),
        )
    return s


def int_const(e):
    """The integer value of a literal index expression, else None."""
    if isinstance(e, Const) and e.val.denominator == 1:
        return int(e.val)
    if isinstance(e, USub):
        v = int_const(e.arg)
        return None if v is None else -v
    return None


def lit(v, real=False):
    return Const(Fraction(v), real)


def names_in_proc(p):
    out = {a.name for a in p.args}
    for s in walk_stmts(p.body):
        if isinstance(s, For):
            out.add(s.iter)
        elif isinstance(s, Alloc):
            out.add(s.name)
    return out


def fresh_name(p, base, taken=()):
    used = names_in_proc(p) | set(taken)
    if base not in used:
        return base
    for k in itertools.count(1):
        cand = f"{base}_{k}"
        if cand not in used:
            return cand


def node_kind(node):
    return type(node).__name__


def dataclass_fields(node):
    return [f.name for f in fields(node)]


def walk_paths(node, prefix=()):
    """Preorder (path, node) pairs for `node` and all of its descendants."""
    yield prefix, node
    for lab, idx, c in children(node):
        yield from walk_paths(c, prefix + ((lab, idx),))
