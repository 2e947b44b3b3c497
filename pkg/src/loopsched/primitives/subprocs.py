"""Subprocedure primitives: inlining, instruction selection, extraction."""

from dataclasses import replace as dc_replace

from ..analysis import VALID, AffineForm, facts_at, normalize, prove, simplify_index
from ..edits import Editor
from ..errors import SchedulingError
from ..ir import (
    DEFAULT_MEM,
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    FnArg,
    For,
    If,
    Interval,
    Pass,
    Procedure,
    Read,
    Reduce,
    USub,
    WindowExpr,
    expr_names,
    fresh_name,
    get_block,
    lit,
    map_expr,
    map_stmt_exprs,
    names_in_proc,
    rename_buffer,
    stmts_names,
    subst,
    walk_stmts,
)
from ..printer import print_expr
from .common import IDENT, cursor_arg, finish, first_names, index_scope


def _loc(path):
    *pp, (lab, k) = path
    return (tuple(pp), lab), k


# --------------------------------------------------------------------------
# inline


def inline(p, call):
    """Replace a call by the callee's body."""
    prim = "inline"
    c = cursor_arg(p, call, "call", prim)
    s = c.node()
    callee = s.proc
    taken = set(names_in_proc(p)) | stmts_names(p.body)
    # rename callee locals and iterators that clash with the caller
    body = list(callee.body)
    for nm in sorted(_bound(callee.body)):
        if nm in taken:
            new = fresh_name(p, nm, taken)
            taken.add(new)
            body = [rename_buffer(b, nm, new) for b in body]
    sizes = {}
    views = {}
    for f, a in zip(callee.args, s.args):
        if f.is_size:
            sizes[f.name] = a
        elif isinstance(a, WindowExpr):
            views[f.name] = (a.name, a.idx)
        elif isinstance(a, Read):
            views[f.name] = (a.name, a.idx if a.idx else None)
        else:
            written = any(isinstance(x, (Assign, Reduce)) and x.name == f.name for x in walk_stmts(callee.body))
            if written:
                raise SchedulingError(f"{prim}: the callee writes scalar '{f.name}' passed by value", c)
            views[f.name] = ("value", a)

    def access(name, idx):
        v = views.get(name)
        if v is None:
            return None
        if v[0] == "value":
            return v[1]
        bname, widx = v
        if widx is None:
            return bname, tuple(idx)
        out = []
        it = iter(idx)
        for w in widx:
            if isinstance(w, Interval):
                e = next(it)
                if isinstance(e, Interval):
                    out.append(Interval(_add(w.lo, e.lo), _add(w.lo, e.hi)))
                else:
                    out.append(_add(w.lo, e))
            else:
                out.append(w)
        return bname, tuple(out)

    def fix_expr(e):
        e = subst(e, sizes)

        def fn(n):
            if isinstance(n, (Read, WindowExpr)) and n.name in views:
                r = access(n.name, n.idx)
                if not isinstance(r, tuple):
                    return r
                bname, idx = r
                if isinstance(n, WindowExpr) or any(isinstance(i, Interval) for i in idx):
                    return WindowExpr(bname, idx)
                return Read(bname, idx)
            return None

        return map_expr(e, fn)

    def fix_stmt(x):
        x = map_stmt_exprs(x, fix_expr)
        return _fix_targets(x, views, access)

    new = [fix_stmt(b) for b in body]
    new = [b for b in new if not isinstance(b, Pass)] or [Pass()]
    loc, k = _loc(c.path)
    ed = Editor(p)
    ed.replace_block(loc, k, k + 1, new)
    pp, lab = loc
    return finish(ed, prim, [(c.path, ("block", pp + ((lab, (k, k + len(new))),)))])


def _add(a, b):
    e = BinOp("+", a, b)
    return simplify_index(e, order=first_names(e))


def _fix_targets(x, views, access):
    if isinstance(x, (Assign, Reduce)) and x.name in views:
        bname, idx = access(x.name, x.idx)
        return dc_replace(x, name=bname, idx=idx)
    if isinstance(x, For):
        return dc_replace(x, body=tuple(_fix_targets(b, views, access) for b in x.body))
    if isinstance(x, If):
        return dc_replace(
            x,
            body=tuple(_fix_targets(b, views, access) for b in x.body),
            orelse=tuple(_fix_targets(b, views, access) for b in x.orelse),
        )
    return x


def _bound(stmts):
    out = set()
    for s in walk_stmts(stmts):
        if isinstance(s, For):
            out.add(s.iter)
        elif isinstance(s, Alloc):
            out.add(s.name)
    return out


# --------------------------------------------------------------------------
# replace: unify a block with an instruction body


class _Fail(Exception):
    pass


class _Unifier:
    """Matches caller statements against an instruction body, solving for
    the instruction's size, buffer and scalar parameters."""

    def __init__(self, p, instr, facts, mems):
        self.p, self.instr, self.facts, self.mems = p, instr, facts, mems
        self.formals = {a.name: a for a in instr.args}
        self.sizes = {}
        self.bufs = {}  # formal -> (caller name, per-dim ("iv", offset) / ("pt", expr))
        self.scalars = {}
        self.iters = {}  # instr iterator -> caller iterator
        self.caller_iters = set()

    def fail(self, msg):
        raise _Fail(msg)

    # statements -------------------------------------------------------
    def stmts(self, ps, cs):
        ps = [x for x in ps if not isinstance(x, Pass)]
        if len(ps) != len(cs):
            self.fail(f"expected {len(ps)} statements, found {len(cs)}")
        for a, b in zip(ps, cs):
            self.stmt(a, b)

    def stmt(self, a, b):
        if type(a) is not type(b):
            self.fail(f"expected {type(a).__name__}, found {type(b).__name__}")
        if isinstance(a, For):
            self.index(a.lo, b.lo)
            self.index(a.hi, b.hi)
            self.iters[a.iter] = b.iter
            self.caller_iters.add(b.iter)
            self.stmts(a.body, b.body)
        elif isinstance(a, If):
            self.fail("conditionals in instruction bodies are not supported")
        elif isinstance(a, (Assign, Reduce)):
            self.access(a.name, a.idx, b.name, b.idx)
            self.num(a.rhs, b.rhs)
        else:
            self.fail(f"cannot match {type(a).__name__}")

    # numeric expressions ----------------------------------------------
    def num(self, a, b):
        if isinstance(a, Read) and a.name in self.formals and not self.formals[a.name].dims and not self.formals[a.name].is_size:
            f = a.name
            if f in self.scalars:
                if self.scalars[f] != b:
                    self.fail(f"'{f}' bound inconsistently")
                return
            if isinstance(b, Read) and b.idx:
                if self._uses_iters(b):
                    self.fail(f"scalar '{f}' would vary across iterations")
                if not self._mem_ok(f, b.name):
                    self.fail(f"memory of '{b.name}' does not match '{f}'")
                self.scalars[f] = b
                return
            if isinstance(b, Read) and not b.idx and self._is_buffer(b.name):
                if not self._mem_ok(f, b.name):
                    self.fail(f"memory of '{b.name}' does not match '{f}'")
                self.scalars[f] = b
                return
            if isinstance(b, Const):
                self.scalars[f] = b
                return
            self.fail(f"cannot bind scalar '{f}' to '{print_expr(b)}'")
        if isinstance(a, Read) and a.name in self.formals:
            if not isinstance(b, Read):
                self.fail(f"expected a read of '{a.name}'")
            self.access(a.name, a.idx, b.name, b.idx)
            return
        if type(a) is not type(b):
            self.fail(f"'{print_expr(a)}' does not match '{print_expr(b)}'")
        if isinstance(a, Const):
            if a.val != b.val:
                self.fail(f"constant {print_expr(a)} vs {print_expr(b)}")
        elif isinstance(a, BinOp):
            if a.op != b.op:
                self.fail(f"operator {a.op} vs {b.op}")
            self.num(a.lhs, b.lhs)
            self.num(a.rhs, b.rhs)
        elif isinstance(a, USub):
            self.num(a.arg, b.arg)
        elif isinstance(a, Read):
            # an instruction iterator used as a value
            if a.name in self.iters and b == Read(self.iters[a.name]):
                return
            self.fail(f"'{print_expr(a)}' does not match '{print_expr(b)}'")

    def _is_buffer(self, name):
        return name not in index_scope(self.p, ()) and name not in self.caller_iters

    def _uses_iters(self, e):
        return bool(expr_names(e) & self.caller_iters)

    def _mem_ok(self, formal, caller_name):
        want = self.formals[formal].mem
        if want is None:
            return True
        return self.mems.get(caller_name, DEFAULT_MEM) == want

    # index expressions --------------------------------------------------
    def _form(self, e, instr_side):
        if instr_side:
            m = {k: AffineForm.var("@" + v) for k, v in self.iters.items()}
            e2 = subst(e, {k: v for k, v in self.sizes.items()})
            f = normalize(e2, m)
        else:
            m = {v: AffineForm.var("@" + v) for v in self.caller_iters}
            f = normalize(e, m)
        if f is None:
            self.fail(f"non-affine index '{print_expr(e)}'")
        return f

    def index(self, a, b):
        """Unify an instruction index expression with a caller one."""
        unknown = [n for n in expr_names(a) if n in self.formals and self.formals[n].is_size and n not in self.sizes]
        fb = self._form(b, False)
        if not unknown:
            fa = self._form(a, True)
            d = fa - fb
            if not d.is_const() or d.const != 0:
                if not self._prove_zero(d):
                    self.fail(f"'{print_expr(a)}' does not match '{print_expr(b)}'")
            return
        if len(unknown) > 1:
            self.fail(f"cannot solve for {', '.join(unknown)}")
        u = unknown[0]
        m = {k: AffineForm.var("@" + v) for k, v in self.iters.items()}
        m[u] = AffineForm.var("@@" + u)
        fa = normalize(subst(a, dict(self.sizes)), m)
        if fa is None:
            self.fail(f"non-affine index '{print_expr(a)}'")
        k = fa.coeff("@@" + u)
        if k not in (1, -1) or any("@@" + u in v.inner.names() for v in fa.atoms()):
            self.fail(f"cannot solve for '{u}'")
        rest = fa - AffineForm({"@@" + u: k})
        sol = (fb - rest).scale(k)  # k is +-1
        if any(isinstance(v, str) and v.startswith("@") for v in sol.names()):
            self.fail(f"'{u}' would depend on a loop iterator")
        self.sizes[u] = sol.to_expr()

    def _prove_zero(self, d):
        if any(isinstance(v, str) and v.startswith("@") for v in d.names()):
            return False
        return prove(self.facts, BinOp("==", d.to_expr(), lit(0))) == VALID

    def access(self, fname, fidx, cname, cidx):
        formal = self.formals.get(fname)
        if formal is None:
            self.fail(f"'{fname}' is not an instruction parameter")
        if not self._mem_ok(fname, cname):
            self.fail(f"memory of '{cname}' does not match '{fname}'")
        fforms = [self._form(i, True) for i in fidx]
        cforms = [self._form(i, False) for i in cidx]
        iter_vars = {"@" + v for v in self.caller_iters}

        def dep(f):
            return any(v in iter_vars for v in f.names())

        # caller dims that vary with the matched loops become window dims
        var_dims = [d for d, f in enumerate(cforms) if dep(f)]
        r = len(fidx)
        if len(var_dims) > r:
            self.fail(f"'{cname}' varies in more dimensions than '{fname}' has")
        extra = [d for d in reversed(range(len(cidx))) if d not in var_dims][: r - len(var_dims)]
        iv_dims = sorted(var_dims + extra)
        if len(iv_dims) != r:
            self.fail(f"'{cname}' has fewer dimensions than '{fname}'")
        spec = []
        k = 0
        for d, cf in enumerate(cforms):
            if d in iv_dims:
                off = cf - fforms[k]
                if dep(off):
                    self.fail(f"index of '{cname}' does not match '{fname}'")
                spec.append(("iv", off))
                k += 1
            else:
                spec.append(("pt", cf))
        spec = tuple(spec)
        prev = self.bufs.get(fname)
        if prev is not None:
            if prev[0] != cname or not all(
                a[0] == b[0] and self._same(a[1], b[1]) for a, b in zip(prev[1], spec)
            ):
                self.fail(f"'{fname}' bound to two different windows")
            return
        self.bufs[fname] = (cname, spec)

    def _same(self, a, b):
        d = a - b
        return (d.is_const() and d.const == 0) or self._prove_zero(d)


def _mems(p, block_path):
    out = {a.name: (a.mem or DEFAULT_MEM) for a in p.args}
    for s in walk_stmts(p.body):
        if isinstance(s, Alloc):
            out[s.name] = s.mem
    return out


def replace(p, block, instr):
    """Replace statements by a call to an equivalent instruction."""
    prim = "replace"
    c = cursor_arg(p, block, "block", prim)
    if not isinstance(instr, Procedure):
        raise SchedulingError(f"{prim}: expected a procedure to call")
    first = c.parent_path + ((c.label, c.rng[0]),)
    facts = facts_at(p, first)
    u = _Unifier(p, instr, facts, _mems(p, first))
    try:
        u.stmts(instr.body, list(c.stmts()))
    except _Fail as e:
        raise SchedulingError(f"{prim}: cannot unify with '{instr.name}': {e}", c) from None
    args = []
    for f in instr.args:
        if f.is_size:
            if f.name not in u.sizes:
                raise SchedulingError(f"{prim}: cannot determine size '{f.name}' of '{instr.name}'", c)
            args.append(u.sizes[f.name])
        elif f.dims:
            if f.name not in u.bufs:
                raise SchedulingError(f"{prim}: parameter '{f.name}' of '{instr.name}' is unused", c)
            cname, spec = u.bufs[f.name]
            dims = [subst(d, u.sizes) for d in f.dims]
            idx, k = [], 0
            for kind, form in spec:
                lo = form.to_expr()
                if kind == "iv":
                    hi = simplify_index(BinOp("+", lo, dims[k]), order=first_names(lo))
                    idx.append(Interval(lo, hi))
                    k += 1
                else:
                    idx.append(lo)
            args.append(WindowExpr(cname, tuple(idx)))
        else:
            if f.name in u.scalars:
                args.append(u.scalars[f.name])
            elif f.name in u.bufs:
                cname, spec = u.bufs[f.name]
                args.append(Read(cname, tuple(form.to_expr() for _, form in spec)))
            else:
                raise SchedulingError(f"{prim}: parameter '{f.name}' of '{instr.name}' is unused", c)
    call = Call(instr, tuple(args))
    # instruction preconditions, and windows within their buffers
    for pred in instr.preds:
        q = subst(pred, u.sizes)
        if prove(facts, q) != VALID:
            raise SchedulingError(
                f"{prim}: cannot prove '{instr.name}' precondition {print_expr(q)}", c, print_expr(q)
            )
    _check_windows(p, call, facts, prim, c)
    loc, (i, j) = c.loc, c.rng
    ed = Editor(p)
    ed.replace_block(loc, i, j, [call])
    return finish(ed, prim)


def _check_windows(p, call, facts, prim, c):
    decl = {a.name: a.dims for a in p.args}
    for s in walk_stmts(p.body):
        if isinstance(s, Alloc):
            decl[s.name] = s.dims
    for a in call.args:
        if isinstance(a, (WindowExpr, Read)) and a.name in decl and a.idx:
            for i, d in zip(a.idx, decl[a.name]):
                lo, hi = (i.lo, i.hi) if isinstance(i, Interval) else (i, BinOp("+", i, lit(1)))
                for pred in (BinOp(">=", lo, lit(0)), BinOp("<=", hi, d)):
                    if prove(facts, pred) != VALID:
                        raise SchedulingError(
                            f"{prim}: cannot prove the window of '{a.name}' is in bounds: {print_expr(pred)}",
                            c, print_expr(pred),
                        )


def call_eqv(p, call, new_proc):
    """Swap the callee of a call for an equivalent procedure."""
    prim = "call_eqv"
    c = cursor_arg(p, call, "call", prim)
    s = c.node()
    if not isinstance(new_proc, Procedure):
        raise SchedulingError(f"{prim}: expected a procedure")
    if s.proc.root() is not new_proc.root():
        raise SchedulingError(
            f"{prim}: '{new_proc.name}' is not derived from the same procedure as '{s.proc.name}'", c
        )
    if [(a.typ, len(a.dims)) for a in s.proc.args] != [(a.typ, len(a.dims)) for a in new_proc.args]:
        raise SchedulingError(f"{prim}: the signatures differ", c)
    ed = Editor(p)
    ed.replace(c.path, Call(new_proc, s.args), keep=True)
    return finish(ed, prim)


def extract_subproc(p, block, name):
    """Move statements into a new procedure and call it.

    Returns (new caller, new subprocedure)."""
    prim = "extract_subproc"
    c = cursor_arg(p, block, "block", prim)
    if not isinstance(name, str) or not IDENT.match(name):
        raise SchedulingError(f"{prim}: '{name}' is not a valid identifier")
    stmts = list(c.stmts())
    if name == p.name or any(isinstance(s, Call) and s.proc.name == name for s in walk_stmts(p.body)):
        raise SchedulingError(f"{prim}: a procedure named '{name}' already exists", c)
    loc, (i, j) = c.loc, c.rng
    rest = get_block(p, *loc)[j:]
    local = {s.name for s in stmts if isinstance(s, Alloc)}
    leaked = local & stmts_names(rest)
    if leaked:
        raise SchedulingError(f"{prim}: '{', '.join(sorted(leaked))}' is used after the block", c)
    first = c.parent_path + ((c.label, c.rng[0]),)
    scope = index_scope(p, first)
    used = stmts_names(stmts) | set().union(set(), *(_dim_names(s) for s in walk_stmts(stmts)))
    bound = _bound(stmts)
    free = used - bound
    bufs = {}
    for a in p.args:
        if a.name in free and a.is_numeric:
            bufs[a.name] = (a.typ, a.dims, a.mem)
    for path_s in walk_stmts(p.body):
        if isinstance(path_s, Alloc) and path_s.name in free and path_s.name not in bufs:
            bufs[path_s.name] = (path_s.typ, path_s.dims, path_s.mem)
    idx_names = (free - set(bufs)) | set().union(set(), *(expr_names(d) for _, ds, _ in bufs.values() for d in ds))
    unknown = idx_names - scope
    if unknown:
        raise SchedulingError(f"{prim}: cannot pass '{', '.join(sorted(unknown))}'", c)
    order = [a.name for a in p.args]
    sizes = [n for n in order if n in idx_names] + sorted(n for n in idx_names if n not in order)
    fargs = []
    for n in sizes:
        a = next((x for x in p.args if x.name == n), None)
        fargs.append(FnArg(n, a.typ if a is not None else "index"))
    bnames = [n for n in order if n in bufs] + sorted(n for n in bufs if n not in order)
    for n in bnames:
        typ, dims, mem = bufs[n]
        fargs.append(FnArg(n, typ, tuple(dims), mem))
    preds = tuple(q for q in p.preds if expr_names(q) <= set(sizes))
    sub = Procedure(name, tuple(fargs), preds, tuple(stmts))
    from ..wellformed import check_wellformed

    diags = check_wellformed(sub)
    if diags:
        raise SchedulingError(f"{prim}: the extracted procedure is ill-formed: {'; '.join(diags)}", c)
    call = Call(sub, tuple(Read(a.name) for a in fargs))
    ed = Editor(p)
    ed.replace_block(loc, i, j, [call])
    return finish(ed, prim), sub


def _dim_names(s):
    if isinstance(s, Alloc):
        return set().union(set(), *(expr_names(d) for d in s.dims))
    return set()
