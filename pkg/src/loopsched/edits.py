"""Atomic AST edits and their cursor-forwarding functions.

Every rewrite is recorded as a sequence of five edit kinds: Insert, Delete,
Replace, Move and Wrap.  Each edit knows how to map a location in the tree
before the edit to the corresponding location after it.  Locations are
plain data so they can be forwarded without a procedure attached:

    ("node", path)              a statement or expression
    ("block", path)             last step's index is a half-open (i, j) range
    ("gap", anchor_path, side)  side is "before" or "after"

`None` means the location was invalidated.  A list position is addressed
by `loc = (parent_path, label)`.
"""

from .errors import EditError, InternalError
from .ir import (
    Hole,
    Pass,
    Procedure,
    child_spec,
    get_at,
    get_block,
    get_child,
    set_at,
    set_block,
)


# --------------------------------------------------------------------------
# path helpers


def through(path, loc):
    """Index at which `path` passes through list `loc`, else None."""
    pp, lab = loc
    n = len(pp)
    if len(path) > n and path[:n] == pp and path[n][0] == lab:
        return path[n][1]
    return None


def with_step(path, depth, idx):
    lab = path[depth][0]
    return path[:depth] + ((lab, idx),) + path[depth + 1 :]


def gap_position(anchor, side):
    *pp, (lab, k) = anchor
    return (tuple(pp), lab), (k if side == "before" else k + 1)


def gap_from_position(root, loc, g):
    pp, lab = loc
    try:
        n = len(get_block(root, pp, lab))
    except (KeyError, IndexError, AttributeError):
        return None
    if g < n:
        return ("gap", pp + ((lab, g),), "before")
    if n > 0:
        return ("gap", pp + ((lab, n - 1),), "after")
    return None


class Edit:
    """Base class; subclasses implement node/block/position forwarding."""

    kind = "edit"
    new_root = None

    def fwd(self, data):
        if data is None:
            return None
        tag = data[0]
        if tag == "node":
            p = self.fwd_node(data[1])
            return None if p is None else ("node", p)
        if tag == "block":
            p = self.fwd_block(data[1])
            return None if p is None else ("block", p)
        if tag == "gap":
            return self.fwd_gap(data[1], data[2])
        raise InternalError(f"bad cursor data {data!r}")

    def fwd_block(self, path):
        *pp, (lab, rng) = path
        pp = tuple(pp)
        own = self.block_rule(pp, lab, rng)
        if own is not NotImplemented:
            return own
        npp = self.fwd_node(pp) if pp else ()
        if npp is None:
            return None
        # the parent may now be a different statement without this list
        try:
            lst = get_block(self.new_root, npp, lab) if self.new_root is not None else None
        except (KeyError, IndexError, AttributeError):
            return None
        if lst is not None and (not isinstance(lst, tuple) or rng[1] > len(lst)):
            return None
        return npp + ((lab, rng),)

    def block_rule(self, pp, lab, rng):
        return NotImplemented

    def fwd_gap(self, anchor, side):
        loc, g = gap_position(anchor, side)
        special = self.gap_rule(loc, g)
        if special is not None:
            return gap_from_position(self.new_root, *special)
        a = self.fwd_node(anchor)
        if a is not None:
            return ("gap", a, side)
        pos = self.fwd_pos(loc, g)
        if pos is None:
            return None
        return gap_from_position(self.new_root, *pos)

    def gap_rule(self, loc, g):
        return None

    def fwd_loc(self, loc):
        pp, lab = loc
        npp = self.fwd_node(pp) if pp else ()
        return None if npp is None else (npp, lab)


def _shift_simple(path, loc, fn):
    """Rewrite the index at `loc`'s level with `fn` (None = invalidate)."""
    k = through(path, loc)
    if k is None or isinstance(k, tuple):
        return path
    nk = fn(k)
    if nk is None:
        return None
    return with_step(path, len(loc[0]), nk)


class Insert(Edit):
    kind = "insert"

    def __init__(self, loc, pos, n):
        self.loc, self.pos, self.n = loc, pos, n

    def fwd_node(self, path):
        return _shift_simple(path, self.loc, lambda k: k + self.n if k >= self.pos else k)

    def block_rule(self, pp, lab, rng):
        if (pp, lab) != self.loc:
            return NotImplemented
        i, j = rng
        if self.pos <= i:
            i, j = i + self.n, j + self.n
        elif self.pos < j:
            j += self.n
        return pp + ((lab, (i, j)),)

    def gap_rule(self, loc, g):
        if loc == self.loc and g == self.pos:
            return loc, self.pos + self.n
        return None

    def fwd_pos(self, loc, g):
        nloc = self.fwd_loc(loc)
        if nloc is None:
            return None
        if loc == self.loc and g >= self.pos:
            g += self.n
        return nloc, g


class Delete(Edit):
    kind = "delete"

    def __init__(self, loc, i, j):
        self.loc, self.i, self.j = loc, i, j

    def _idx(self, k):
        if k < self.i:
            return k
        if k < self.j:
            return None
        return k - (self.j - self.i)

    def fwd_node(self, path):
        return _shift_simple(path, self.loc, self._idx)

    def block_rule(self, pp, lab, rng):
        if (pp, lab) != self.loc:
            return NotImplemented
        a, b = rng
        i, j, n = self.i, self.j, self.j - self.i
        na = a if a < i else (i if a < j else a - n)
        nb = b if b <= i else (i if b <= j else b - n)
        if na >= nb:
            return None
        return pp + ((lab, (na, nb)),)

    def fwd_pos(self, loc, g):
        nloc = self.fwd_loc(loc)
        if nloc is None:
            return None
        if loc == self.loc:
            if self.i < g <= self.j:
                g = self.i
            elif g > self.j:
                g -= self.j - self.i
        return nloc, g


class Replace(Edit):
    """Replace one node, or the block [i, j) of a list, by a fragment.

    Paths to the replaced root stay valid.  Paths below it survive only
    into child slots whose subtree object is carried over unchanged, or,
    for a shape-preserving replace (`keep`), wherever the same relative
    path still reaches a node of the same class.
    """

    kind = "replace"

    def __init__(self, target, old, new, block=None, keep=False):
        # node form: target = path; block form: target = loc, block = (i, j, k)
        self.target, self.old, self.new, self.block = target, old, new, block
        self.keep = keep

    def fwd_node(self, path):
        if self.block is None:
            t = self.target
            if len(path) >= len(t) and path[: len(t)] == t:
                if len(path) == len(t):
                    return path
                if self.keep:
                    return path if _same_shape(self.old, self.new, path[len(t) :]) else None
                return path if _same_child(self.old, self.new, path[len(t)]) else None
            return path
        loc = self.target
        i, j, k = self.block
        m = through(path, loc)
        if m is None or isinstance(m, tuple):
            return path
        d = len(loc[0])
        if m < i:
            return path
        if m >= j:
            return with_step(path, d, m + k - (j - i))
        if m == i and k >= 1:
            if len(path) == d + 1:
                return path
            old0, new0 = self.old[0], self.new[0]
            if old0 is new0:
                return path
            return path if _same_child(old0, new0, path[d + 1]) else None
        return None

    def block_rule(self, pp, lab, rng):
        if self.block is None:
            return NotImplemented
        if (pp, lab) != self.target:
            return NotImplemented
        i, j, k = self.block
        a, b = rng
        if (a, b) == (i, j):
            return pp + ((lab, (i, i + k)),) if k > 0 else None
        if b <= i:
            return pp + ((lab, (a, b)),)
        if a >= j:
            return pp + ((lab, (a + k - (j - i), b + k - (j - i))),)
        if a <= i and b >= j:
            return pp + ((lab, (a, b + k - (j - i))),)
        return None

    def fwd_pos(self, loc, g):
        nloc = self.fwd_loc(loc)
        if nloc is None:
            return None
        if self.block is not None and loc == self.target:
            i, j, k = self.block
            if i < g < j:
                g = i
            elif g >= j:
                g += k - (j - i)
        return nloc, g


def _same_shape(old, new, rel):
    try:
        return type(get_at(old, rel)) is type(get_at(new, rel))
    except (KeyError, IndexError, AttributeError, TypeError):
        return False


def _same_child(old, new, step):
    lab, idx = step
    try:
        if isinstance(idx, tuple):
            return get_child(old, lab) is get_child(new, lab) or (
                get_child(old, lab)[idx[0] : idx[1]] == get_child(new, lab)[idx[0] : idx[1]]
                and all(
                    a is b
                    for a, b in zip(get_child(old, lab)[idx[0] : idx[1]], get_child(new, lab)[idx[0] : idx[1]])
                )
            )
        return get_child(old, lab, idx) is get_child(new, lab, idx)
    except (KeyError, IndexError):
        return False


class Move(Edit):
    """Move block [i, j) of list `src` to position `pos` of list `dst`.

    `pos` is in pre-edit coordinates of `dst`.  Block cursors straddling the
    moved range are invalidated.
    """

    kind = "move"

    def __init__(self, src, i, j, dst, pos):
        self.src, self.i, self.j = src, i, j
        self.dst, self.pos = dst, pos
        self._del = Delete(src, i, j)
        ndst = self._del.fwd_loc(dst)
        if ndst is None:
            raise EditError("move destination lies inside the moved block")
        npos = pos
        if dst == src:
            if i < pos < j:
                raise EditError("move destination lies inside the moved block")
            if pos >= j:
                npos = pos - (j - i)
        self.ndst, self.npos = ndst, npos
        self._ins = Insert(ndst, npos, j - i)

    def _moved(self, path):
        m = through(path, self.src)
        if m is None or isinstance(m, tuple) or not (self.i <= m < self.j):
            return None
        d = len(self.src[0])
        pp, lab = self.ndst
        return pp + ((lab, self.npos + m - self.i),) + path[d + 1 :]

    def fwd_node(self, path):
        moved = self._moved(path)
        if moved is not None:
            return moved
        p = self._del.fwd_node(path)
        return None if p is None else self._ins.fwd_node(p)

    def fwd_block(self, path):
        *pp, (lab, (a, b)) = path
        pp = tuple(pp)
        if (pp, lab) == self.src:
            if self.i <= a and b <= self.j:
                dpp, dlab = self.ndst
                off = self.npos - self.i
                return dpp + ((dlab, (a + off, b + off)),)
            if b <= self.i or a >= self.j:
                p = self._del.fwd_block(path)
                return None if p is None else self._ins.fwd_block(p)
            return None
        inner = self._moved(pp + ((lab, 0),)) if pp else None
        if inner is not None:
            return inner[:-1] + ((lab, (a, b)),)
        p = self._del.fwd_block(path)
        return None if p is None else self._ins.fwd_block(p)

    def gap_rule(self, loc, g):
        return None

    def fwd_gap(self, anchor, side):
        moved = self._moved(anchor)
        if moved is not None:
            return ("gap", moved, side)
        loc, g = gap_position(anchor, side)
        a = self._del.fwd_node(anchor)
        if a is not None:
            return ("gap", self._ins.fwd_node(a), side)
        pos = self._del.fwd_pos(loc, g)
        if pos is None:
            return None
        pos = self._ins.fwd_pos(*pos)
        if pos is None:
            return None
        return gap_from_position(self.new_root, *pos)

    def fwd_pos(self, loc, g):
        pos = self._del.fwd_pos(loc, g)
        return None if pos is None else self._ins.fwd_pos(*pos)


class Wrap(Edit):
    """Wrap block [i, j) of `loc` (or one expression node) in a fragment.

    Block form: the wrapper statement's list child `hole` receives the
    statements.  Expression form: `hole_path` locates the Hole inside the
    wrapper expression.
    """

    kind = "wrap"

    def __init__(self, loc=None, i=None, j=None, hole=None, target=None, hole_path=None):
        self.loc, self.i, self.j, self.hole = loc, i, j, hole
        self.target, self.hole_path = target, hole_path

    def fwd_node(self, path):
        if self.target is not None:
            t = self.target
            if len(path) >= len(t) and path[: len(t)] == t:
                return t + self.hole_path + path[len(t) :]
            return path
        m = through(path, self.loc)
        if m is None or isinstance(m, tuple):
            return path
        d = len(self.loc[0])
        i, j = self.i, self.j
        if m < i:
            return path
        if m >= j:
            return with_step(path, d, m - (j - i) + 1)
        lab = self.loc[1]
        return self.loc[0] + ((lab, i), (self.hole, m - i)) + path[d + 1 :]

    def block_rule(self, pp, lab, rng):
        if self.target is not None or (pp, lab) != self.loc:
            return NotImplemented
        a, b = rng
        i, j = self.i, self.j
        if i <= a and b <= j:
            return pp + ((lab, i), (self.hole, (a - i, b - i)))
        if b <= i:
            return pp + ((lab, (a, b)),)
        if a >= j:
            return pp + ((lab, (a - (j - i) + 1, b - (j - i) + 1)),)
        if a <= i and b >= j:
            return pp + ((lab, (a, b - (j - i) + 1)),)
        return None

    def fwd_pos(self, loc, g):
        nloc = self.fwd_loc(loc)
        if nloc is None:
            return None
        if self.target is None and loc == self.loc:
            i, j = self.i, self.j
            if i < g < j:
                return (self.loc[0] + ((self.loc[1], i),), self.hole), g - i
            if g >= j:
                g = g - (j - i) + 1
        return nloc, g


# --------------------------------------------------------------------------
# traces and the editor


class Trace:
    """The edits one primitive performed, plus an optional override.

    `override(data)` sees cursor data in pre-edit coordinates and may return
    final-coordinate data (or `False` to invalidate); returning None defers
    to composing the atomic edits.
    """

    def __init__(self, edits, override=None, label=None):
        self.edits = tuple(edits)
        self.override = override
        self.label = label

    def fwd(self, data):
        if data is None:
            return None
        if self.override is not None:
            r = self.override(data)
            if r is False:
                return None
            if r is not None:
                return r
        for e in self.edits:
            data = e.fwd(data)
            if data is None:
                return None
        return data


class Editor:
    """Applies atomic edits to a working copy of a procedure."""

    def __init__(self, proc):
        self.orig = proc
        self.root = proc
        self.edits = []

    # queries ------------------------------------------------------------
    def node(self, path):
        return get_at(self.root, path)

    def block(self, loc):
        return get_block(self.root, *loc)

    def fwd(self, data):
        for e in self.edits:
            data = e.fwd(data)
            if data is None:
                return None
        return data

    def fwd_path(self, path):
        d = self.fwd(("node", path))
        return None if d is None else d[1]

    def fwd_loc(self, loc):
        pp, lab = loc
        if not pp:
            return loc
        npp = self.fwd_path(pp)
        return None if npp is None else (npp, lab)

    def _record(self, edit, new_root):
        edit.new_root = new_root
        self.root = new_root
        self.edits.append(edit)

    # the five edits -----------------------------------------------------
    def insert(self, loc, pos, stmts):
        stmts = tuple(stmts)
        if not stmts:
            return
        lst = list(self.block(loc))
        if not 0 <= pos <= len(lst):
            raise EditError(f"insert position {pos} out of range")
        lst[pos:pos] = stmts
        self._record(Insert(loc, pos, len(stmts)), set_block(self.root, *loc, lst))

    def delete(self, loc, i, j):
        lst = list(self.block(loc))
        if not 0 <= i < j <= len(lst):
            raise EditError(f"delete range [{i}, {j}) out of range")
        del lst[i:j]
        self._record(Delete(loc, i, j), set_block(self.root, *loc, lst))

    def replace(self, path, new, keep=False):
        old = self.node(path)
        if old is new:
            return
        self._record(Replace(path, old, new, keep=keep), set_at(self.root, path, new))

    def replace_block(self, loc, i, j, stmts):
        stmts = tuple(stmts)
        lst = list(self.block(loc))
        if not 0 <= i < j <= len(lst):
            raise EditError(f"replace range [{i}, {j}) out of range")
        old = tuple(lst[i:j])
        lst[i:j] = stmts
        self._record(Replace(loc, old, stmts, block=(i, j, len(stmts))), set_block(self.root, *loc, lst))

    def move(self, src, i, j, dst, pos):
        lst = list(self.block(src))
        if not 0 <= i < j <= len(lst):
            raise EditError(f"move range [{i}, {j}) out of range")
        edit = Move(src, i, j, dst, pos)
        moved = tuple(lst[i:j])
        del lst[i:j]
        root = set_block(self.root, *src, lst)
        dlst = list(get_block(root, *edit.ndst))
        dlst[edit.npos : edit.npos] = moved
        root = set_block(root, *edit.ndst, dlst)
        self._record(edit, root)

    def wrap_block(self, loc, i, j, wrapper, hole="body"):
        lst = list(self.block(loc))
        if not 0 <= i < j <= len(lst):
            raise EditError(f"wrap range [{i}, {j}) out of range")
        attr, is_list = child_spec(wrapper, hole)
        if not is_list:
            raise EditError("wrapper hole must be a statement list")
        from .ir import with_list

        w = with_list(wrapper, hole, lst[i:j])
        lst[i:j] = [w]
        self._record(Wrap(loc, i, j, hole), set_block(self.root, *loc, lst))

    def wrap_expr(self, path, wrapper, hole_path):
        old = self.node(path)
        if not isinstance(get_at(wrapper, hole_path), Hole):
            raise EditError("wrapper has no hole at the given path")
        new = set_at(wrapper, hole_path, old)
        self._record(Wrap(target=path, hole_path=hole_path), set_at(self.root, path, new))

    # composites used by many primitives ---------------------------------
    def replace_stmt(self, path, stmts):
        *pp, (lab, k) = path
        self.replace_block((tuple(pp), lab), k, k + 1, stmts)

    def delete_stmt(self, path):
        *pp, (lab, k) = path
        self.delete((tuple(pp), lab), k, k + 1)

    def fill_empty(self):
        """Put a Pass into every block a rewrite left empty."""
        from .ir import For, If, walk_paths

        while True:
            for path, n in walk_paths(self.root):
                if isinstance(n, (For, If)) and not n.body:
                    self.insert((path, "body"), 0, [Pass()])
                    break
            else:
                return

    def finish(self, override=None, label=None, **changes):
        self.fill_empty()
        root = self.root
        if not root.body:
            raise InternalError("rewrite emptied the procedure body")
        new = Procedure(
            changes.get("name", root.name),
            changes.get("args", root.args),
            changes.get("preds", root.preds),
            root.body,
            changes.get("instr", root.instr),
            parent=self.orig,
            trace=Trace(self.edits, override, label),
        )
        from .wellformed import check_wellformed

        diags = check_wellformed(new)
        if diags:
            raise InternalError(f"{label or 'rewrite'} produced an ill-formed procedure: {'; '.join(diags)}")
        return new
