"""Statement and expression primitives."""

from fractions import Fraction

from ..analysis import (
    VALID,
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
    Alloc,
    Assign,
    BinOp,
    Call,
    CMP_OPS,
    BOOL_OPS,
    Const,
    For,
    If,
    Interval,
    Pass,
    Read,
    Reduce,
    USub,
    WindowExpr,
    expr_names,
    get_at,
    get_block,
    stmts_names,
    walk_expr,
    walk_paths,
    walk_stmts,
)
from ..printer import print_expr
from .common import (
    cursor_arg,
    expr_arg,
    finish,
    first_names,
    index_scope,
    is_bool_expr,
    remap,
    require,
)


def _loc(path):
    *pp, (lab, k) = path
    return (tuple(pp), lab), k


def _two_stmts(p, s1, s2, prim):
    """Resolve either a block of two statements or two adjacent cursors."""
    if s2 is None:
        c = cursor_arg(p, s1, "block", prim)
        if len(c) != 2:
            raise SchedulingError(f"{prim}: expected a block of exactly two statements", c)
        return c[0], c[1]
    a = cursor_arg(p, s1, "stmt", prim)
    b = cursor_arg(p, s2, "stmt", prim)
    (la, ka), (lb, kb) = _loc(a.path), _loc(b.path)
    if la != lb or kb != ka + 1:
        raise SchedulingError(f"{prim}: the statements must be adjacent", b)
    return a, b


def _commute_err(prim, c, facts, A, B):
    trace = []
    if may_conflict(facts, A, B, {}, {}, (), trace=trace):
        err = SchedulingError(f"{prim}: the statements may not commute", c, "commute(s1, s2)")
        err.explanation = "\n".join(trace)
        raise err


def reorder_stmts(p, s1, s2=None):
    """Swap two adjacent statements that commute."""
    prim = "reorder_stmts"
    a, b = _two_stmts(p, s1, s2, prim)
    sa, sb = a.node(), b.node()
    if isinstance(sa, Alloc) and sa.name in stmts_names([sb]):
        raise SchedulingError(f"{prim}: the second statement uses '{sa.name}' allocated by the first", b)
    if isinstance(sb, Alloc) and sb.name in stmts_names([sa]):
        raise SchedulingError(f"{prim}: name clash on '{sb.name}'", b)
    facts = facts_at(p, a.path)
    _commute_err(prim, b, facts, collect_accesses([sa]), collect_accesses([sb]))
    loc, k = _loc(a.path)
    ed = Editor(p)
    ed.move(loc, k + 1, k + 2, loc, k)
    return finish(ed, prim)


def commute_expr(p, exprs):
    """Swap the operands of commutative binary expressions."""
    prim = "commute_expr"
    if not isinstance(exprs, (list, tuple)):
        exprs = [exprs]
    cs = [cursor_arg(p, e, "expr", prim) for e in exprs]
    ed = Editor(p)
    table = []
    for c in cs:
        e = c.node()
        if not isinstance(e, BinOp) or e.op not in ("+", "*"):
            what = f"'{e.op}'" if isinstance(e, BinOp) else type(e).__name__
            raise SchedulingError(f"{prim}: {what} is not a commutative operator", c)
        path = ed.fwd_path(c.path)
        ed.replace(path, BinOp(e.op, e.rhs, e.lhs))
        E = c.path
        table += [(E + (("lhs", None),), E + (("rhs", None),)), (E + (("rhs", None),), E + (("lhs", None),))]
    return finish(ed, prim, table)


def specialize(p, block, conds):
    """Duplicate statements under an if/else chain of conditions."""
    prim = "specialize"
    c = cursor_arg(p, block, "block", prim)
    if not isinstance(conds, (list, tuple)):
        conds = [conds]
    if not conds:
        raise SchedulingError(f"{prim}: no conditions given", c)
    first = c.parent_path + ((c.label, c.rng[0]),)
    scope = index_scope(p, first)
    parsed = []
    for e in conds:
        e = expr_arg(e, prim, "condition")
        if not is_bool_expr(e):
            raise SchedulingError(f"{prim}: '{print_expr(e)}' is not a boolean condition", c)
        bad = sorted(expr_names(e) - scope)
        if bad:
            raise SchedulingError(f"{prim}: condition uses names not in scope: {', '.join(bad)}", c)
        if normalize(_cmp_sides(e)) is None and not _affine_bool(e):
            raise SchedulingError(f"{prim}: condition '{print_expr(e)}' is not affine", c)
        parsed.append(e)
    stmts = tuple(c.stmts())
    if any(isinstance(s, Alloc) for s in stmts):
        raise SchedulingError(f"{prim}: cannot specialize an allocation", c)
    tree = stmts
    for e in reversed(parsed):
        tree = (If(e, stmts, tree),)
    loc, (i, j) = c.loc, c.rng
    ed = Editor(p)
    ed.replace_block(loc, i, j, tree)
    pp, lab = loc
    P = pp + ((lab, i),)
    table = [(pp + ((lab, i + m),), P + (("body", m),)) for m in range(j - i)]
    return finish(ed, prim, table)


def _cmp_sides(e):
    return e.lhs if isinstance(e, BinOp) and e.op in CMP_OPS else e


def _affine_bool(e):
    if isinstance(e, BinOp) and e.op in BOOL_OPS:
        return _affine_bool(e.lhs) and _affine_bool(e.rhs)
    if isinstance(e, BinOp) and e.op in CMP_OPS:
        return normalize(e.lhs) is not None and normalize(e.rhs) is not None
    return False


# --------------------------------------------------------------------------
# simplification


def _index_slots(root):
    """Paths of maximal index expressions inside `root` (a procedure)."""
    out = []
    for path, n in walk_paths(root):
        if isinstance(n, For):
            out += [path + (("lo", None),), path + (("hi", None),)]
        elif isinstance(n, (Assign, Reduce, Read, WindowExpr)) and n.idx:
            for k, i in enumerate(n.idx):
                if isinstance(i, Interval):
                    out += [path + (("idx", k), ("lo", None)), path + (("idx", k), ("hi", None))]
                else:
                    out.append(path + (("idx", k),))
        elif isinstance(n, Alloc):
            out += [path + (("dims", k),) for k in range(len(n.dims))]
        elif isinstance(n, BinOp) and n.op in CMP_OPS:
            out += [path + (("lhs", None),), path + (("rhs", None),)]
        elif isinstance(n, Call):
            for k, (f, a) in enumerate(zip(n.proc.args, n.args)):
                if f.is_size:
                    out.append(path + (("arg", k),))
    return out


def _stmt_prefix(p, path):
    """Path of the innermost statement containing `path`."""
    from ..ir import Stmt

    best = ()
    node = p
    for d, step in enumerate(path):
        node = get_at(node, (step,))
        if isinstance(node, Stmt):
            best = path[: d + 1]
    return best


def _fold_numeric(e):
    """Exact arithmetic folding on numeric expressions."""

    def fn(n):
        if isinstance(n, BinOp) and n.op in ("+", "-", "*", "/"):
            a, b = n.lhs, n.rhs
            if isinstance(a, Const) and isinstance(b, Const):
                if n.op == "/" and b.val == 0:
                    return None
                if n.op == "/" and not (a.real or b.real):
                    return None  # integer division stays
                v = {"+": a.val + b.val, "-": a.val - b.val, "*": a.val * b.val}.get(n.op)
                if n.op == "/":
                    v = a.val / b.val
                return Const(Fraction(v), a.real or b.real)
            if n.op == "+" and isinstance(b, Const) and b.val == 0:
                return a
            if n.op == "+" and isinstance(a, Const) and a.val == 0:
                return b
            if n.op == "-" and isinstance(b, Const) and b.val == 0:
                return a
            if n.op == "*" and isinstance(b, Const) and b.val == 1:
                return a
            if n.op == "*" and isinstance(a, Const) and a.val == 1:
                return b
        return None

    from ..ir import map_expr

    return map_expr(e, fn)


def simplify(p, scope=None):
    """Normalize index arithmetic and fold constant numeric arithmetic,
    everywhere or only inside the statement `scope`."""
    prim = "simplify"
    if scope is None:
        inside = lambda path: True  # noqa: E731
    else:
        L = cursor_arg(p, scope, "stmt", prim).path
        inside = lambda path: path[: len(L)] == L  # noqa: E731
    ed = Editor(p)
    for path in _index_slots(p):
        if not inside(path):
            continue
        e = get_at(p, path)
        facts = facts_at(p, _stmt_prefix(p, path))
        new = simplify_index(e, facts, order=first_names(e))
        if new != e:
            ed.replace(path, new)
    for path, n in walk_paths(p):
        if isinstance(n, (Assign, Reduce)) and inside(path):
            rp = path + (("rhs", None),)
            cur = ed.node(rp)
            new = _fold_numeric(cur)
            if new != cur:
                ed.replace(rp, new)
    return finish(ed, prim)


def eliminate_dead_code(p, scope):
    """Remove a loop that never runs or an if whose branch is decided."""
    prim = "eliminate_dead_code"
    c = cursor_arg(p, scope, "stmt", prim)
    s, L = c.node(), c.path
    facts = facts_at(p, L)
    loc, k = _loc(L)
    ed = Editor(p)
    pp, lab = loc
    if isinstance(s, For):
        if prove(facts, BinOp(">=", s.lo, s.hi)) != VALID:
            raise SchedulingError(f"{prim}: cannot prove the loop runs zero times", c, f"{print_expr(s.lo)} >= {print_expr(s.hi)}")
        ed.replace_block(loc, k, k + 1, [Pass()] if len(get_block(p, pp, lab)) == 1 else [])
        return finish(ed, prim, [(L, None)])
    if isinstance(s, If):
        if prove(facts, s.cond) == VALID:
            keep, branch = s.body, "body"
        elif _prove_not(facts, s.cond):
            keep, branch = s.orelse, "orelse"
        else:
            raise SchedulingError(f"{prim}: cannot decide the condition", c, print_expr(s.cond))
        only = len(get_block(p, pp, lab)) == 1
        new = keep if keep else ((Pass(),) if only else ())
        ed.replace_block(loc, k, k + 1, new)
        table = [(L, ("block", pp + ((lab, (k, k + len(new))),)) if new else None)]
        table.append((L + (branch,), pp + (lab,)))
        return finish(ed, prim, lambda d: _shift_branch(d, L, branch, pp, lab, k, table))
    raise SchedulingError(f"{prim}: expected a loop or if statement", c)


def _shift_branch(d, L, branch, pp, lab, k, table):
    path = d[1]
    n = len(L)
    if path[:n] == L and len(path) > n and path[n][0] == branch:
        idx = path[n][1]
        idx = (idx[0] + k, idx[1] + k) if isinstance(idx, tuple) else idx + k
        out = pp + ((lab, idx),) + path[n + 1 :]
        return ("gap", out, d[2]) if d[0] == "gap" else (d[0], out)
    if path[:n] == L:
        return remap(d, table[:1]) if len(path) == n else False
    return None


def _prove_not(facts, cond):
    neg = _negate(cond)
    return neg is not None and prove(facts, neg) == VALID


_NEG = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def _negate(e):
    if isinstance(e, BinOp) and e.op in _NEG:
        return BinOp(_NEG[e.op], e.lhs, e.rhs)
    if isinstance(e, BinOp) and e.op in BOOL_OPS:
        a, b = _negate(e.lhs), _negate(e.rhs)
        if a is None or b is None:
            return None
        return BinOp("or" if e.op == "and" else "and", a, b)
    return None


# --------------------------------------------------------------------------
# expression rewriting


def _index_slots_of(p, path):
    return [q for q in _index_slots(p) if path[: len(q)] == q]


def poly(e):
    """Polynomial normal form of a numeric expression over opaque reads.

    Returns {monomial: coefficient} with monomials as sorted tuples of
    atom strings, or None when the expression divides by a non-constant."""
    if isinstance(e, Const):
        return {(): e.val} if e.val else {}
    if isinstance(e, Read):
        return {(print_expr(e),): Fraction(1)}
    if isinstance(e, USub):
        a = poly(e.arg)
        return None if a is None else {m: -c for m, c in a.items()}
    if isinstance(e, BinOp):
        a, b = poly(e.lhs), poly(e.rhs)
        if a is None or b is None:
            return None
        if e.op in ("+", "-"):
            out = dict(a)
            for m, c in b.items():
                out[m] = out.get(m, 0) + (c if e.op == "+" else -c)
            return {m: c for m, c in out.items() if c}
        if e.op == "*":
            out = {}
            for m1, c1 in a.items():
                for m2, c2 in b.items():
                    m = tuple(sorted(m1 + m2))
                    out[m] = out.get(m, 0) + c1 * c2
            return {m: c for m, c in out.items() if c}
        if e.op == "/" and set(b) <= {()} and b.get(()):
            k = b[()]
            return {m: c / k for m, c in a.items()}
    return None


def rewrite_expr(p, expr, new_expr):
    """Replace an expression by one provably equal in context."""
    prim = "rewrite_expr"
    c = cursor_arg(p, expr, "expr", prim)
    old = c.node()
    new = expr_arg(new_expr, prim)
    facts = facts_at(p, _stmt_prefix(p, c.path))
    scope = index_scope(p, c.path)
    if _index_slots_of(p, c.path):
        bad = sorted(expr_names(new) - scope)
        if bad:
            raise SchedulingError(f"{prim}: new expression uses names not in scope: {', '.join(bad)}", c)
        if is_bool_expr(old) or is_bool_expr(new):
            ok = prove(facts.add_pred(old), new) == VALID and prove(facts.add_pred(new), old) == VALID
            if not ok:
                raise SchedulingError(f"{prim}: cannot prove the conditions equivalent", c)
        else:
            require(facts, BinOp("==", old, new), prim, "the expressions are equal", c)
    else:
        if is_bool_expr(old):
            ok = (
                is_bool_expr(new)
                and prove(facts.add_pred(old), new) == VALID
                and prove(facts.add_pred(new), old) == VALID
            )
            if not ok:
                raise SchedulingError(f"{prim}: cannot prove the conditions equivalent", c)
        else:
            pa, pb = poly(old), poly(new)
            if pa is None or pb is None or pa != pb:
                raise SchedulingError(
                    f"{prim}: cannot show '{print_expr(old)}' equals '{print_expr(new)}'", c,
                    f"{print_expr(old)} == {print_expr(new)}",
                )
            reads_old = {n.name for n in walk_expr(old) if isinstance(n, Read)}
            bad = sorted({n.name for n in walk_expr(new) if isinstance(n, Read)} - reads_old - scope)
            if bad:
                raise SchedulingError(f"{prim}: new expression reads names not in the old one: {', '.join(bad)}", c)
    ed = Editor(p)
    ed.replace(c.path, new)
    return finish(ed, prim)


def merge_writes(p, s1, s2=None):
    """Merge two consecutive writes to the same location."""
    prim = "merge_writes"
    a, b = _two_stmts(p, s1, s2, prim)
    x, y = a.node(), b.node()
    if not isinstance(x, (Assign, Reduce)) or not isinstance(y, (Assign, Reduce)):
        raise SchedulingError(f"{prim}: both statements must be assignments or reductions", b)
    if x.name != y.name or x.idx != y.idx:
        raise SchedulingError(f"{prim}: the statements write different locations", b)
    if any(isinstance(n, Read) and n.name == y.name for n in walk_expr(y.rhs)):
        raise SchedulingError(f"{prim}: the second right-hand side reads '{y.name}'", b)
    if isinstance(y, Assign):
        new = y
    elif isinstance(x, Assign):
        new = Assign(x.name, x.idx, BinOp("+", x.rhs, y.rhs))
    else:
        new = Reduce(x.name, x.idx, BinOp("+", x.rhs, y.rhs))
    loc, k = _loc(a.path)
    ed = Editor(p)
    ed.replace_block(loc, k, k + 2, [new])
    return finish(ed, prim, [(a.path, a.path), (b.path, a.path)])


def inline_assign(p, s):
    """Substitute `x = e` into the statements after it and drop it."""
    prim = "inline_assign"
    c = cursor_arg(p, s, "stmt", prim)
    st = c.node()
    if not isinstance(st, Assign):
        raise SchedulingError(f"{prim}: expected an assignment", c)
    loc, k = _loc(c.path)
    pp, lab = loc
    block = get_block(p, pp, lab)
    allocs = [b for b in block[:k] if isinstance(b, Alloc) and b.name == st.name]
    if not allocs:
        raise SchedulingError(f"{prim}: '{st.name}' must be allocated in the same block", c)
    rest = block[k + 1 :]
    target = Read(st.name, st.idx)
    srcs = {n.name for n in walk_expr(st.rhs) if isinstance(n, Read)}
    for s2 in walk_stmts(rest):
        if isinstance(s2, (Assign, Reduce)) and s2.name == st.name:
            raise SchedulingError(f"{prim}: '{st.name}' is written again after the assignment", c)
        if isinstance(s2, (Assign, Reduce)) and s2.name in srcs:
            raise SchedulingError(f"{prim}: '{s2.name}' is modified after the assignment", c)
        if isinstance(s2, For) and s2.iter in srcs:
            raise SchedulingError(f"{prim}: '{s2.iter}' is rebound after the assignment", c)
        if isinstance(s2, Call):
            raise SchedulingError(f"{prim}: a call follows the assignment", c)
    ed = Editor(p)
    for m in range(len(rest)):
        spath = pp + ((lab, k + 1 + m),)
        for path, n in list(walk_paths(get_at(p, spath), spath)):
            if isinstance(n, (Read, WindowExpr)) and n.name == st.name:
                if n != target:
                    raise SchedulingError(f"{prim}: '{print_expr(n)}' may alias the assigned location", c)
                ed.replace(ed.fwd_path(path), st.rhs)
    ed.delete(loc, k, k + 1)
    return finish(ed, prim, [(c.path, None)])
