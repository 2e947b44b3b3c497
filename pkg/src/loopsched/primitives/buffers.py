"""Buffer primitives: allocation placement, layout, staging, annotation."""

from dataclasses import replace

from ..analysis import (
    VALID,
    AffineForm,
    Lin,
    collect_accesses,
    facts_at,
    may_conflict,
    normalize,
    prove,
    simplify_index,
)
from ..edits import Editor
from ..errors import SchedulingError
from ..ir import (
    NUMERIC_TYPES,
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    FnArg,
    For,
    If,
    Interval,
    Read,
    Reduce,
    Stmt,
    WindowExpr,
    expr_names,
    fresh_name,
    get_at,
    get_block,
    int_const,
    lit,
    stmts_names,
    walk_expr,
    walk_paths,
    walk_stmts,
)
from ..memory import known_memories
from ..printer import print_expr
from .common import (
    IDENT,
    buffer_arg,
    cursor_arg,
    expr_arg,
    finish,
    first_names,
    fresh_ident,
    index_expr_arg,
    index_scope,
    int_arg,
    is_bool_expr,
    require,
)


def _loc(path):
    *pp, (lab, k) = path
    return (tuple(pp), lab), k


def _scope_paths(p, c):
    """Statement paths in which an allocation (or parameter) is visible."""
    if isinstance(c, FnArg):
        return [(("body", k),) for k in range(len(p.body))]
    (pp, lab), k = _loc(c.path)
    n = len(get_block(p, pp, lab))
    return [pp + ((lab, m),) for m in range(k + 1, n)]


def _accesses(p, paths, name):
    """(path, node) for every use of buffer `name` under the given statements."""
    out = []
    for sp in paths:
        for path, n in walk_paths(get_at(p, sp), sp):
            if isinstance(n, (Read, WindowExpr, Assign, Reduce)) and n.name == name:
                out.append((path, n))
    return out


def _enclosing_stmt(p, path):
    best = ()
    node = p
    for d, step in enumerate(path):
        node = get_at(node, (step,))
        if isinstance(node, Stmt):
            best = path[: d + 1]
    return best


def _in_call(p, path):
    """True when the node at `path` is a call argument."""
    return bool(path) and path[-1][0] == "arg"


def _rewrite(ed, p, accs, fn):
    for path, n in accs:
        new = fn(path, n)
        if new is not None and new != n:
            ed.replace(path, new, keep=True)


def _buf_decl(p, c):
    if isinstance(c, FnArg):
        return c
    return c.node()


def _with_idx(n, idx, name=None):
    name = n.name if name is None else name
    if isinstance(n, WindowExpr):
        if not any(isinstance(i, Interval) for i in idx):
            return Read(name, tuple(idx))
        return WindowExpr(name, tuple(idx))
    return replace(n, name=name, idx=tuple(idx))


def _simp(e, facts=None):
    return simplify_index(e, facts, order=first_names(e))


def _no_windows(p, accs, name, prim, c):
    for path, n in accs:
        if isinstance(n, WindowExpr) or (isinstance(n, Read) and _in_call(p, path)):
            raise SchedulingError(f"{prim}: '{name}' is windowed or passed to a call", c)


# --------------------------------------------------------------------------
# allocation placement


def lift_alloc(p, alloc, n_lifts=1):
    """Move an allocation out of its enclosing loop or if."""
    prim = "lift_alloc"
    c = cursor_arg(p, alloc, "alloc", prim)
    for _ in range(int_arg(n_lifts, prim, "n_lifts")):
        a, L = c.node(), c.path
        if len(L) < 2:
            raise SchedulingError(f"{prim}: the allocation is already at the top level", c)
        P = L[:-1]
        outer = get_at(p, P)
        if isinstance(outer, For) and outer.iter in set().union(*(expr_names(d) for d in a.dims)):
            raise SchedulingError(f"{prim}: the size of '{a.name}' depends on '{outer.iter}'", c)
        (ploc, pk) = _loc(P)
        later = get_block(p, *ploc)[pk + 1 :]
        if a.name in stmts_names(later) or any(
            isinstance(s, (Alloc, For)) and getattr(s, "name", getattr(s, "iter", None)) == a.name
            for s in walk_stmts(later)
        ):
            raise SchedulingError(f"{prim}: '{a.name}' is already used after the enclosing statement", c)
        body = outer.body[: L[-1][1]] + outer.body[L[-1][1] + 1 :] if isinstance(outer, For) else ()
        if isinstance(outer, For) and _carried(p, P, outer, a.name, body):
            raise SchedulingError(f"{prim}: values of '{a.name}' would be carried between iterations", c)
        (loc, k) = _loc(L)
        ed = Editor(p)
        ed.move(loc, k, k + 1, ploc, pk)
        new = finish(ed, prim)
        c = new.forward(c)
        p = new
    return p


def sink_alloc(p, alloc):
    """Move an allocation into the loop that directly follows it."""
    prim = "sink_alloc"
    c = cursor_arg(p, alloc, "alloc", prim)
    a, L = c.node(), c.path
    (loc, k) = _loc(L)
    block = get_block(p, *loc)
    if k + 1 >= len(block) or not isinstance(block[k + 1], For):
        raise SchedulingError(f"{prim}: the allocation must be followed by a loop", c)
    loop = block[k + 1]
    if a.name in stmts_names(block[k + 2 :]):
        raise SchedulingError(f"{prim}: '{a.name}' is used after the loop", c)
    if loop.iter in set().union(set(), *(expr_names(d) for d in a.dims)):
        raise SchedulingError(f"{prim}: bad allocation size", c)
    if _carried(p, L, loop, a.name, loop.body):
        raise SchedulingError(f"{prim}: values of '{a.name}' may be carried between iterations", c)
    ed = Editor(p)
    ed.move(loc, k, k + 1, (loc[0] + ((loc[1], k + 1),), "body"), 0)
    return finish(ed, prim)


def _carried(p, L, loop, name, body):
    """Whether one iteration of `loop` (running `body`) may read a value of
    `name` that an earlier iteration left behind."""
    it = loop.iter
    facts = facts_at(p, L).add_range(it + "@a", loop.lo, loop.hi).add_range(it + "@b", loop.lo, loop.hi)
    accs = [x for x in collect_accesses(body) if x.buf == name]
    W = [x for x in accs if x.mode != "R"]
    R = [x for x in accs if x.mode != "W"]
    rel = [Lin.from_form(AffineForm.var(it + "@b") - AffineForm.var(it + "@a") - 1)]
    if not may_conflict(facts, W, R, {it: it + "@a"}, {it: it + "@b"}, rel, reduce_commutes=False):
        return False
    return not _covered_first(body, name)


def _covered_first(body, name, written=()):
    """Every read of `name` in an iteration is preceded, in that same
    iteration, by an assignment to the same location at the same or an
    enclosing level."""
    written = set(written)
    for s in body:
        if isinstance(s, For):
            if not _covered_first(s.body, name, written):
                return False
            continue
        if isinstance(s, If):
            if not (_covered_first(s.body, name, written) and _covered_first(s.orelse, name, written)):
                return False
            continue
        for acc in collect_accesses([s]):
            if acc.buf != name:
                continue
            if acc.mode != "W" and acc.idx not in written:
                return False
        for n in walk_stmts([s]):
            for e in _stmt_exprs(n):
                if any(isinstance(x, WindowExpr) and x.name == name for x in walk_expr(e)):
                    return False
        if isinstance(s, Assign) and s.name == name:
            written.add(s.idx)
    return True


def _stmt_exprs(s):
    from ..ir import stmt_exprs

    return stmt_exprs(s)


def delete_buffer(p, alloc):
    """Remove an allocation that is never used."""
    prim = "delete_buffer"
    c = cursor_arg(p, alloc, "alloc", prim)
    a = c.node()
    if _accesses(p, _scope_paths(p, c), a.name):
        raise SchedulingError(f"{prim}: '{a.name}' is still used", c)
    loc, k = _loc(c.path)
    ed = Editor(p)
    ed.delete(loc, k, k + 1)
    return finish(ed, prim)


def reuse_buffer(p, buf, replace_buf):
    """Use buffer `buf` in place of a later, dead-disjoint `replace_buf`."""
    prim = "reuse_buffer"
    ca = cursor_arg(p, buf, "alloc", prim)
    cb = cursor_arg(p, replace_buf, "alloc", prim)
    a, b = ca.node(), cb.node()
    if (a.typ, a.dims, a.mem) != (b.typ, b.dims, b.mem):
        raise SchedulingError(f"{prim}: '{a.name}' and '{b.name}' differ in type, shape or memory", cb)
    (aloc, ak) = _loc(ca.path)
    # b must be declared later in a's scope
    pa = aloc[0]
    if cb.path[: len(pa)] != pa or len(cb.path) <= len(pa) or cb.path[len(pa)][0] != aloc[1] or cb.path[len(pa)][1] <= ak:
        raise SchedulingError(f"{prim}: '{b.name}' is not allocated after '{a.name}' in its scope", cb)
    later = _dynamically_after(p, cb.path, len(pa))
    if a.name in stmts_names([get_at(p, q) for q in later]):
        raise SchedulingError(f"{prim}: '{a.name}' is still live after '{b.name}' is allocated", cb)
    bpaths = _scope_paths(p, cb)
    accs = _accesses(p, bpaths, b.name)
    ed = Editor(p)
    _rewrite(ed, p, accs, lambda path, n: replace(n, name=a.name))
    bloc, bk = _loc(cb.path)
    ed.delete(bloc, bk, bk + 1)
    return finish(ed, prim)


def _dynamically_after(p, path, stop):
    """Statement paths that may execute after the statement at `path`,
    up to the block at depth `stop`."""
    out = []
    cur = path
    while len(cur) > stop:
        (pp, lab), k = _loc(cur)
        n = len(get_block(p, pp, lab))
        out += [pp + ((lab, m),) for m in range(k + 1, n)]
        if len(pp) <= stop:
            break
        container = get_at(p, pp)
        if isinstance(container, For):
            out += [pp + (("body", m),) for m in range(k)]
        cur = pp
    return out


# --------------------------------------------------------------------------
# layout


def _alloc_or_fail(p, alloc, prim):
    c = cursor_arg(p, alloc, "alloc", prim)
    return c, c.node()


def _dim_arg(a, dim, prim):
    dim = int_arg(dim, prim, "dimension", positive=False)
    if not 0 <= dim < len(a.dims):
        raise SchedulingError(f"{prim}: '{a.name}' has no dimension {dim}")
    return dim


def resize_dim(p, alloc, dim, size, offset, fold=False):
    """Shrink one dimension to `size` entries starting at `offset`."""
    prim = "resize_dim"
    c, a = _alloc_or_fail(p, alloc, prim)
    dim = _dim_arg(a, dim, prim)
    size = index_expr_arg(p, c.path, size, prim, "size")
    off = index_expr_arg(p, c.path, offset, prim, "offset")
    require(facts_at(p, c.path), BinOp(">", size, lit(0)), prim, "a positive size", c)
    accs = _accesses(p, _scope_paths(p, c), a.name)
    hi = BinOp("+", off, size)

    def check(e, path, what):
        fs = facts_at(p, _enclosing_stmt(p, path))
        require(fs, BinOp(">=", e, off), prim, f"{what} >= offset", c)
        require(fs, BinOp("<", e, hi), prim, f"{what} < offset + size", c)

    for path, n in accs:
        if isinstance(n, Read) and not n.idx:
            raise SchedulingError(f"{prim}: '{a.name}' is passed whole to a call", c)
        e = n.idx[dim]
        if isinstance(e, Interval):
            check(e.lo, path, "window start")
            fs = facts_at(p, _enclosing_stmt(p, path))
            require(fs, BinOp("<=", e.hi, hi), prim, "window end <= offset + size", c)
        else:
            check(e, path, "index")

    def shift(e):
        d = _simp(BinOp("-", e, off))
        return BinOp("%", d, size) if fold else d

    def fn(path, n):
        idx = list(n.idx)
        e = idx[dim]
        idx[dim] = Interval(shift(e.lo), _simp(BinOp("-", e.hi, off))) if isinstance(e, Interval) else shift(e)
        return _with_idx(n, idx)

    ed = Editor(p)
    _rewrite(ed, p, accs, fn)
    dims = list(a.dims)
    dims[dim] = size
    ed.replace(c.path, replace(a, dims=tuple(dims)), keep=True)
    return finish(ed, prim)


def expand_dim(p, alloc, size, index):
    """Add a new leading dimension of extent `size`, indexed by `index`."""
    prim = "expand_dim"
    c, a = _alloc_or_fail(p, alloc, prim)
    size = index_expr_arg(p, c.path, size, prim, "size")
    require(facts_at(p, c.path), BinOp(">", size, lit(0)), prim, "a positive size", c)
    index = expr_arg(index, prim, "index")
    if normalize(index) is None:
        raise SchedulingError(f"{prim}: index '{print_expr(index)}' is not affine", c)
    accs = _accesses(p, _scope_paths(p, c), a.name)
    for path, n in accs:
        sp = _enclosing_stmt(p, path)
        bad = sorted(expr_names(index) - index_scope(p, sp))
        if bad:
            raise SchedulingError(f"{prim}: index uses names not in scope at a use of '{a.name}': {', '.join(bad)}", c)
        fs = facts_at(p, sp)
        require(fs, BinOp(">=", index, lit(0)), prim, "index >= 0", c)
        require(fs, BinOp("<", index, size), prim, "index < size", c)

    def fn(path, n):
        if isinstance(n, Read) and not n.idx and a.dims:
            return WindowExpr(n.name, (index,) + tuple(Interval(lit(0), d) for d in a.dims))
        return _with_idx(n, (index,) + tuple(n.idx))

    ed = Editor(p)
    _rewrite(ed, p, accs, fn)
    ed.replace(c.path, replace(a, dims=(size,) + tuple(a.dims)), keep=True)
    return finish(ed, prim)


def rearrange_dim(p, alloc, permute):
    """Permute the dimensions of a buffer."""
    prim = "rearrange_dim"
    c, a = _alloc_or_fail(p, alloc, prim)
    perm = [int_arg(x, prim, "dimension", positive=False) for x in permute]
    if sorted(perm) != list(range(len(a.dims))):
        raise SchedulingError(f"{prim}: {list(permute)} is not a permutation of {len(a.dims)} dimensions", c)
    accs = _accesses(p, _scope_paths(p, c), a.name)
    _no_windows(p, accs, a.name, prim, c)
    ed = Editor(p)
    _rewrite(ed, p, accs, lambda path, n: _with_idx(n, [n.idx[k] for k in perm]))
    ed.replace(c.path, replace(a, dims=tuple(a.dims[k] for k in perm)), keep=True)
    return finish(ed, prim)


def divide_dim(p, alloc, dim, quotient):
    """Split dimension `dim` of constant size n into (n/c, c)."""
    prim = "divide_dim"
    c, a = _alloc_or_fail(p, alloc, prim)
    dim = _dim_arg(a, dim, prim)
    q = int_arg(quotient, prim, "divisor")
    n = int_const(simplify_index(a.dims[dim]))
    if n is None:
        raise SchedulingError(f"{prim}: dimension {dim} of '{a.name}' is not constant", c)
    if n % q:
        raise SchedulingError(f"{prim}: {q} does not divide {n}", c, f"{n} % {q} == 0")
    accs = _accesses(p, _scope_paths(p, c), a.name)
    _no_windows(p, accs, a.name, prim, c)

    def fn(path, node):
        fs = facts_at(p, _enclosing_stmt(p, path))
        e = node.idx[dim]
        idx = list(node.idx)
        idx[dim : dim + 1] = [_simp(BinOp("/", e, lit(q)), fs), _simp(BinOp("%", e, lit(q)), fs)]
        return _with_idx(node, idx)

    ed = Editor(p)
    _rewrite(ed, p, accs, fn)
    dims = list(a.dims)
    dims[dim : dim + 1] = [lit(n // q), lit(q)]
    ed.replace(c.path, replace(a, dims=tuple(dims)), keep=True)
    return finish(ed, prim)


def mult_dim(p, alloc, hi_dim, lo_dim):
    """Merge dimension `lo_dim` (constant size) into `hi_dim`."""
    prim = "mult_dim"
    c, a = _alloc_or_fail(p, alloc, prim)
    hd, ld = _dim_arg(a, hi_dim, prim), _dim_arg(a, lo_dim, prim)
    if hd == ld:
        raise SchedulingError(f"{prim}: the two dimensions must differ", c)
    k = int_const(simplify_index(a.dims[ld]))
    if k is None:
        raise SchedulingError(f"{prim}: dimension {ld} of '{a.name}' is not constant", c)
    accs = _accesses(p, _scope_paths(p, c), a.name)
    _no_windows(p, accs, a.name, prim, c)

    def merge(lst, hv, lv):
        out = list(lst)
        out[hd] = hv
        del out[ld]
        return out

    def fn(path, node):
        e = _simp(BinOp("+", BinOp("*", lit(k), node.idx[hd]), node.idx[ld]))
        return _with_idx(node, merge(node.idx, e, None))

    hv = a.dims[hd]
    size = lit(int_const(hv) * k) if int_const(hv) is not None else BinOp("*", hv, lit(k))
    ed = Editor(p)
    _rewrite(ed, p, accs, fn)
    ed.replace(c.path, replace(a, dims=tuple(merge(a.dims, size, None))), keep=True)
    return finish(ed, prim)


def unroll_buffer(p, alloc, dim):
    """Replace a constant-size dimension accessed at constant indices by
    separate buffers."""
    prim = "unroll_buffer"
    c, a = _alloc_or_fail(p, alloc, prim)
    dim = _dim_arg(a, dim, prim)
    n = int_const(simplify_index(a.dims[dim]))
    if n is None:
        raise SchedulingError(f"{prim}: dimension {dim} of '{a.name}' is not constant", c)
    accs = _accesses(p, _scope_paths(p, c), a.name)
    consts = []
    for path, node in accs:
        if isinstance(node, Read) and not node.idx:
            raise SchedulingError(f"{prim}: '{a.name}' is passed whole to a call", c)
        e = node.idx[dim]
        v = None if isinstance(e, Interval) else int_const(simplify_index(e))
        if v is None:
            raise SchedulingError(f"{prim}: '{a.name}' is accessed at a non-constant index in dimension {dim}", c)
        consts.append(v)
    taken = set()
    names = []
    for k in range(n):
        nm = fresh_name(p, f"{a.name}_{k}", taken)
        taken.add(nm)
        names.append(nm)

    def fn(path, node):
        v = int_const(simplify_index(node.idx[dim]))
        idx = list(node.idx)
        del idx[dim]
        return _with_idx(node, idx, names[v])

    ed = Editor(p)
    _rewrite(ed, p, accs, fn)
    dims = tuple(d for i, d in enumerate(a.dims) if i != dim)
    (loc, k0) = _loc(c.path)
    ed.replace_block(loc, k0, k0 + 1, [replace(a, name=nm, dims=dims) for nm in names])
    return finish(ed, prim)


# --------------------------------------------------------------------------
# binding and staging


def _buffer_type(p, name, path):
    for a in p.args:
        if a.name == name:
            return a.typ
    for s in walk_stmts(p.body):
        if isinstance(s, Alloc) and s.name == name:
            return s.typ
    return None


def bind_expr(p, exprs, new_name, cse=False):
    """Compute a numeric expression into a new scalar just before use."""
    prim = "bind_expr"
    if isinstance(exprs, str):
        from ..cursors import find_all

        cs = find_all(p, exprs)
        if not cs:
            from ..errors import NotFoundError

            raise NotFoundError(f"pattern {exprs!r} matched nothing")
        cs = [cursor_arg(p, x, "expr", prim) for x in cs]
    elif isinstance(exprs, (list, tuple)):
        cs = [cursor_arg(p, x, "expr", prim) for x in exprs]
    else:
        cs = [cursor_arg(p, exprs, "expr", prim)]
    if not cs:
        raise SchedulingError(f"{prim}: no expressions given")
    name = fresh_ident(p, new_name, prim)
    e = cs[0].node()
    from .stmts import _index_slots_of

    for x in cs:
        if x.node() != e:
            raise SchedulingError(f"{prim}: the expressions are not all equal", x)
        if _index_slots_of(p, x.path) or is_bool_expr(x.node()) or isinstance(x.node(), (Interval, WindowExpr)):
            raise SchedulingError(f"{prim}: '{print_expr(x.node())}' is not a numeric expression", x)
        sp = _enclosing_stmt(p, x.path)
        if not isinstance(get_at(p, sp), (Assign, Reduce)):
            raise SchedulingError(f"{prim}: '{print_expr(x.node())}' is not a numeric expression", x)
    if cse:
        sp = _enclosing_stmt(p, cs[0].path)
        seen = {x.path for x in cs}
        for path, n in walk_paths(get_at(p, sp), sp):
            if n == e and path not in seen and path[-1][0] != "idx":
                from ..cursors import make_node_cursor

                cs.append(make_node_cursor(p, path))
    # the insertion block: deepest list every occurrence passes through
    stmts = [_enclosing_stmt(p, x.path) for x in cs]
    first = min(stmts)
    depth = len(first) - 1
    while depth >= 0:
        pre = first[:depth]
        lab = first[depth][0]
        if all(s[:depth] == pre and s[depth][0] == lab for s in stmts):
            break
        depth -= 1
    pre, lab = first[:depth], first[depth][0]
    ks = [s[depth][1] for s in stmts]
    k0, k1 = min(ks), max(ks)
    ins = pre + ((lab, k0),)
    scope = index_scope(p, ins)
    occ_scope = index_scope(p, stmts[0])
    idx_names = {n.name for n in walk_expr(e) if isinstance(n, Read) and not n.idx and n.name in occ_scope}
    bufs = {n.name for n in walk_expr(e) if isinstance(n, Read)} - idx_names
    bad = sorted(idx_names - scope)
    if bad:
        raise SchedulingError(f"{prim}: the expression depends on '{', '.join(bad)}' bound below the binding point", cs[0])
    between = [get_at(p, pre + ((lab, m),)) for m in range(k0, k1 + 1)]
    written = set()
    for s in walk_stmts(between):
        if isinstance(s, (Assign, Reduce)):
            written.add(s.name)
        if isinstance(s, Call):
            written |= {a.name for a in s.args if isinstance(a, (Read, WindowExpr))}
    own = len(cs) == 1 and isinstance(between[0], (Assign, Reduce)) and len(between) == 1
    if written & bufs and not own:
        raise SchedulingError(
            f"{prim}: '{', '.join(sorted(written & bufs))}' may change between the binding and a use", cs[0]
        )
    typ = _buffer_type(p, get_at(p, stmts[0]).name, stmts[0]) or "f32"
    ed = Editor(p)
    for x in cs:
        ed.replace(x.path, Read(name))
    ed.insert((pre, lab), k0, [Alloc(name, typ), Assign(name, (), e)])
    return finish(ed, prim)


def _parse_window(p, window, prim):
    if isinstance(window, (WindowExpr, Read)):
        w = window
    else:
        w = expr_arg(window, prim, "window")
    if isinstance(w, Read):
        w = WindowExpr(w.name, w.idx)
    if not isinstance(w, WindowExpr):
        raise SchedulingError(f"{prim}: '{window}' is not a buffer window")
    return w


def _buffer_decl(p, name, at):
    for a in p.args:
        if a.name == name and a.is_numeric:
            return a.typ, a.dims
    for path, n in walk_paths(p):
        if isinstance(n, Alloc) and n.name == name:
            return n.typ, n.dims
    return None


def stage_mem(p, block, window, new_name, accum=False):
    """Stage the window of a buffer used by `block` through a new local
    buffer: load before, compute on the copy, store back after."""
    prim = "stage_mem"
    c = cursor_arg(p, block, "block", prim)
    w = _parse_window(p, window, prim)
    decl = _buffer_decl(p, w.name, c)
    if decl is None:
        raise SchedulingError(f"{prim}: unknown buffer '{w.name}'", c)
    typ, bdims = decl
    if len(w.idx) != len(bdims):
        raise SchedulingError(f"{prim}: the window has rank {len(w.idx)} but '{w.name}' has rank {len(bdims)}", c)
    name = fresh_ident(p, new_name, prim)
    first = c.parent_path + ((c.label, c.rng[0]),)
    scope = index_scope(p, first)
    for i in w.idx:
        parts = (i.lo, i.hi) if isinstance(i, Interval) else (i,)
        for e in parts:
            bad = sorted(expr_names(e) - scope)
            if bad or normalize(e) is None:
                raise SchedulingError(f"{prim}: bad window bound '{print_expr(e)}'", c)
    stmts = list(c.stmts())
    facts = facts_at(p, first)
    accs = [a for a in collect_accesses(stmts) if a.buf == w.name]
    if not accs:
        raise SchedulingError(f"{prim}: '{w.name}' is not used in the block", c)
    for a in accs:
        fs = facts
        for cx in a.ctx:
            fs = fs.add_range(cx[1], cx[2], cx[3]) if cx[0] == "for" else fs.add_pred(cx[1], cx[2])
        for d, (e, wi) in enumerate(zip(a.idx, w.idx)):
            if isinstance(wi, Interval):
                require(fs, BinOp(">=", e, wi.lo), prim, f"accesses of '{w.name}' lie inside the window", c)
                require(fs, BinOp("<", e, wi.hi), prim, f"accesses of '{w.name}' lie inside the window", c)
            else:
                require(fs, BinOp("==", e, wi), prim, f"accesses of '{w.name}' lie inside the window", c)
    # whole-buffer uses cannot be redirected
    spaths = [c.parent_path + ((c.label, m),) for m in range(*c.rng)]
    uses = _accesses(p, spaths, w.name)
    for path, n in uses:
        if bdims and isinstance(n, Read) and not n.idx:
            raise SchedulingError(f"{prim}: '{w.name}' is passed whole to a call in the block", c)
    modes = {a.mode for a in accs}
    if accum and modes != {"+"}:
        raise SchedulingError(f"{prim}: accumulation staging needs a block that only reduces into '{w.name}'", c)

    ivs = [(d, i) for d, i in enumerate(w.idx) if isinstance(i, Interval)]
    ext = [_simp(BinOp("-", i.hi, i.lo), facts) for _, i in ivs]
    taken = {name}
    its = []
    for k in range(len(ivs)):
        nm = fresh_name(p, f"i{k}", taken)
        taken.add(nm)
        its.append(nm)

    def buf_idx(vars_):
        out, m = [], 0
        for i in w.idx:
            if isinstance(i, Interval):
                out.append(_simp(BinOp("+", i.lo, Read(vars_[m]))))
                m += 1
            else:
                out.append(i)
        return tuple(out)

    tidx = tuple(Read(v) for v in its)

    def nest(stmt):
        for v, e in reversed(list(zip(its, ext))):
            stmt = For(v, lit(0), e, (stmt,))
        return stmt

    pre = [Alloc(name, typ, tuple(ext))]
    post = []
    if accum:
        pre.append(nest(Assign(name, tidx, Const(0, True))))
        post.append(nest(Reduce(w.name, buf_idx(its), Read(name, tidx))))
    else:
        lead = next(
            [a for a in collect_accesses([s]) if a.buf == w.name]
            for s in stmts
            if any(a.buf == w.name for a in collect_accesses([s]))
        )
        if not _covers(lead, w, ext, facts):
            pre.append(nest(Assign(name, tidx, Read(w.name, buf_idx(its)))))
        if modes & {"W", "+"} and not _dead_after(p, w.name, uses):
            post.append(nest(Assign(w.name, buf_idx(its), Read(name, tidx))))

    def fn(path, n):
        idx = []
        for e, wi in zip(n.idx, w.idx):
            if isinstance(wi, Interval):
                if isinstance(e, Interval):
                    idx.append(Interval(_simp(BinOp("-", e.lo, wi.lo)), _simp(BinOp("-", e.hi, wi.lo))))
                else:
                    idx.append(_simp(BinOp("-", e, wi.lo)))
            elif isinstance(e, Interval):
                raise SchedulingError(f"{prim}: a window of '{w.name}' spans a staged point dimension", c)
        return _with_idx(n, idx, name)

    ed = Editor(p)
    _rewrite(ed, p, uses, fn)
    loc, (i, j) = c.loc, c.rng
    ed.insert(loc, j, post)
    ed.insert(loc, i, pre)
    return finish(ed, prim)


def _dead_after(p, name, uses):
    """A local buffer used nowhere but the staged block needs no write-back."""
    if any(a.name == name for a in p.args):
        return False
    allocs = [n for n in walk_stmts(p.body) if isinstance(n, Alloc) and n.name == name]
    everywhere = _accesses(p, [(("body", k),) for k in range(len(p.body))], name)
    return len(allocs) == 1 and len(everywhere) == len(uses)


def _covers(accs, w, ext, facts):
    """Does a single plain write touch every cell of the window?  `accs`
    are the accesses of the first statement that uses the buffer."""
    if len(accs) != 1 or accs[0].mode != "W":
        return False
    a = accs[0]
    if any(cx[0] != "for" for cx in a.ctx):
        return False
    loops = {cx[1]: cx for cx in a.ctx}
    used = set()
    m = 0
    for e, wi in zip(a.idx, w.idx):
        if not isinstance(wi, Interval):
            continue
        f = normalize(BinOp("-", e, wi.lo))
        if f is None:
            return False
        vs = [v for v, _ in f.coeffs]
        if len(vs) != 1 or vs[0] not in loops or f.coeff(vs[0]) != 1 or vs[0] in used:
            return False
        used.add(vs[0])
        _, it, lo, hi = loops[vs[0]]
        off = lit(int(f.const)) if f.const.denominator == 1 else None
        if off is None:
            return False
        if prove(facts, BinOp("==", BinOp("+", lo, off), lit(0))) != VALID:
            return False
        if prove(facts, BinOp("==", BinOp("+", hi, off), ext[m])) != VALID:
            return False
        m += 1
    for it, cx in loops.items():
        if it not in used and prove(facts, BinOp(">", cx[3], cx[2])) != VALID:
            return False
    return True


# --------------------------------------------------------------------------
# annotations


def _annotate(p, buf, prim, **changes):
    target = buffer_arg(p, buf, prim)
    ed = Editor(p)
    if isinstance(target, FnArg):
        args = tuple(replace(a, **changes) if a.name == target.name else a for a in p.args)
        return finish(ed, prim, args=args)
    ed.replace(target.path, replace(target.node(), **changes), keep=True)
    return finish(ed, prim)


def set_memory(p, buf, mem):
    """Place a buffer in memory space `mem`."""
    prim = "set_memory"
    if not isinstance(mem, str) or not IDENT.match(mem) or mem not in known_memories():
        raise SchedulingError(f"{prim}: unknown memory '{mem}' (known: {', '.join(known_memories())})")
    return _annotate(p, buf, prim, mem=mem)


def set_precision(p, buf, typ):
    """Change the numeric type of a buffer."""
    prim = "set_precision"
    if typ not in NUMERIC_TYPES:
        raise SchedulingError(f"{prim}: '{typ}' is not a numeric type ({', '.join(NUMERIC_TYPES)})")
    return _annotate(p, buf, prim, typ=typ)
