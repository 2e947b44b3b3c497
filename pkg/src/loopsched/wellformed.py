"""Static checks: scoping, index typing, arity."""

from .ir import (
    INDEX_TYPES,
    NUMERIC_TYPES,
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    For,
    Hole,
    If,
    Interval,
    Pass,
    Read,
    Reduce,
    USub,
    WindowExpr,
)

# kinds of bound names
SIZE, ITER, BUF = "size", "iter", "buf"


class _Env:
    def __init__(self, parent=None):
        self.parent = parent
        self.names = {}

    def lookup(self, name):
        env = self
        while env is not None:
            if name in env.names:
                return env.names[name]
            env = env.parent
        return None

    def bind(self, name, info):
        self.names[name] = info


def check_wellformed(p):
    """Return a list of diagnostics; empty iff `p` is well formed."""
    diags = []
    env = _Env()
    for a in p.args:
        if env.lookup(a.name) is not None:
            diags.append(f"duplicate parameter '{a.name}'")
        if a.typ in INDEX_TYPES:
            env.bind(a.name, (SIZE, a.typ, ()))
        elif a.typ in NUMERIC_TYPES:
            env.bind(a.name, (BUF, a.typ, a.dims))
        else:
            diags.append(f"parameter '{a.name}' has unknown type {a.typ!r}")
    for a in p.args:
        for d in a.dims:
            _check_index(d, env, diags, f"dimension of '{a.name}'")
    for pred in p.preds:
        for n in _names(pred):
            info = env.lookup(n)
            if info is None:
                diags.append(f"assert references unbound name '{n}'")
            elif info[0] != SIZE:
                diags.append(f"assert may only reference size parameters, found '{n}'")
        _check_pred(pred, env, diags, "assert")
    if not p.body:
        diags.append("empty procedure body")
    _check_block(p.body, env, diags)
    return diags


def _names(e):
    out = []
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, (Read, WindowExpr)):
            out.append(n.name)
        if isinstance(n, (Read, WindowExpr)):
            stack.extend(n.idx)
        elif isinstance(n, BinOp):
            stack.extend((n.lhs, n.rhs))
        elif isinstance(n, USub):
            stack.append(n.arg)
        elif isinstance(n, Interval):
            stack.extend((n.lo, n.hi))
    return out


def _check_block(stmts, env, diags):
    if not stmts:
        diags.append("empty block (use 'pass')")
    for s in stmts:
        _check_stmt(s, env, diags)


def _check_stmt(s, env, diags):
    if isinstance(s, For):
        _check_index(s.lo, env, diags, f"lower bound of loop '{s.iter}'")
        _check_index(s.hi, env, diags, f"upper bound of loop '{s.iter}'")
        if env.lookup(s.iter) is not None:
            diags.append(f"loop iterator '{s.iter}' shadows an existing name")
        inner = _Env(env)
        inner.bind(s.iter, (ITER, "index", ()))
        _check_block(s.body, inner, diags)
    elif isinstance(s, If):
        _check_pred(s.cond, env, diags, "if condition")
        _check_block(s.body, _Env(env), diags)
        if s.orelse:
            _check_block(s.orelse, _Env(env), diags)
    elif isinstance(s, (Assign, Reduce)):
        info = env.lookup(s.name)
        if info is None:
            diags.append(f"assignment to unbound name '{s.name}'")
        elif info[0] != BUF:
            diags.append(f"cannot assign to {info[0]} '{s.name}'")
        elif len(info[2]) != len(s.idx):
            diags.append(f"'{s.name}' expects {len(info[2])} indices, got {len(s.idx)}")
        for i in s.idx:
            _check_index(i, env, diags, f"index of '{s.name}'")
        _check_numeric(s.rhs, env, diags)
    elif isinstance(s, Alloc):
        if s.typ not in NUMERIC_TYPES:
            diags.append(f"allocation '{s.name}' has non-numeric type {s.typ!r}")
        if env.lookup(s.name) is not None:
            diags.append(f"allocation '{s.name}' shadows an existing name")
        for d in s.dims:
            _check_index(d, env, diags, f"dimension of '{s.name}'")
        env.bind(s.name, (BUF, s.typ, s.dims))
    elif isinstance(s, Pass):
        pass
    elif isinstance(s, Call):
        _check_call(s, env, diags)
    else:
        diags.append(f"unexpected statement {type(s).__name__}")


def _check_call(s, env, diags):
    callee = s.proc
    if len(callee.args) != len(s.args):
        diags.append(f"call to '{callee.name}' expects {len(callee.args)} arguments, got {len(s.args)}")
        return
    for formal, actual in zip(callee.args, s.args):
        if formal.typ in INDEX_TYPES:
            _check_index(actual, env, diags, f"argument '{formal.name}' of '{callee.name}'")
        elif formal.dims:
            if isinstance(actual, WindowExpr):
                info = env.lookup(actual.name)
                if info is None or info[0] != BUF:
                    diags.append(f"window of unbound buffer '{actual.name}'")
                    continue
                if len(actual.idx) != len(info[2]):
                    diags.append(f"window of '{actual.name}' has wrong rank")
                n_iv = sum(isinstance(i, Interval) for i in actual.idx)
                if n_iv != len(formal.dims):
                    diags.append(
                        f"argument '{formal.name}' of '{callee.name}' needs a {len(formal.dims)}-d window"
                    )
                for i in actual.idx:
                    if isinstance(i, Interval):
                        _check_index(i.lo, env, diags, "window bound")
                        _check_index(i.hi, env, diags, "window bound")
                    else:
                        _check_index(i, env, diags, "window index")
            elif isinstance(actual, Read) and not actual.idx:
                info = env.lookup(actual.name)
                if info is None or info[0] != BUF or len(info[2]) != len(formal.dims):
                    diags.append(f"argument '{formal.name}' of '{callee.name}' needs a buffer of rank {len(formal.dims)}")
            else:
                diags.append(f"argument '{formal.name}' of '{callee.name}' must be a window")
        else:
            _check_numeric(actual, env, diags)


def _check_numeric(e, env, diags):
    if isinstance(e, Const):
        return
    if isinstance(e, Read):
        info = env.lookup(e.name)
        if info is None:
            diags.append(f"unbound name '{e.name}'")
            return
        if info[0] == BUF:
            if len(info[2]) != len(e.idx):
                diags.append(f"'{e.name}' expects {len(info[2])} indices, got {len(e.idx)}")
            for i in e.idx:
                _check_index(i, env, diags, f"index of '{e.name}'")
        elif e.idx:
            diags.append(f"cannot index {info[0]} '{e.name}'")
        return
    if isinstance(e, BinOp):
        if e.op not in ("+", "-", "*", "/"):
            diags.append(f"operator {e.op!r} not allowed in a numeric expression")
        _check_numeric(e.lhs, env, diags)
        _check_numeric(e.rhs, env, diags)
        return
    if isinstance(e, USub):
        _check_numeric(e.arg, env, diags)
        return
    if isinstance(e, Hole):
        diags.append("wildcard in procedure")
        return
    diags.append(f"{type(e).__name__} not allowed in a numeric expression")


def _check_index(e, env, diags, where):
    """Index expressions are affine in sizes/iterators plus const div/mod."""
    if isinstance(e, Const):
        if e.val.denominator != 1:
            diags.append(f"{where}: non-integer literal")
        return
    if isinstance(e, Read):
        info = env.lookup(e.name)
        if info is None:
            diags.append(f"{where}: unbound name '{e.name}'")
        elif info[0] == BUF:
            diags.append(f"{where}: buffer '{e.name}' read in index position")
        elif e.idx:
            diags.append(f"{where}: cannot index '{e.name}'")
        return
    if isinstance(e, USub):
        _check_index(e.arg, env, diags, where)
        return
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            _check_index(e.lhs, env, diags, where)
            _check_index(e.rhs, env, diags, where)
        elif e.op == "*":
            _check_index(e.lhs, env, diags, where)
            _check_index(e.rhs, env, diags, where)
            if not (_is_const_index(e.lhs) or _is_const_index(e.rhs)):
                diags.append(f"{where}: non-affine product")
        elif e.op in ("/", "%"):
            _check_index(e.lhs, env, diags, where)
            if not isinstance(e.rhs, Const) or e.rhs.val.denominator != 1 or e.rhs.val <= 0:
                diags.append(f"{where}: '{e.op}' needs a positive integer literal divisor")
        else:
            diags.append(f"{where}: operator {e.op!r} in index position")
        return
    diags.append(f"{where}: {type(e).__name__} in index position")


def _is_const_index(e):
    if isinstance(e, Const):
        return True
    if isinstance(e, USub):
        return _is_const_index(e.arg)
    if isinstance(e, BinOp) and e.op in ("+", "-", "*", "/", "%"):
        return _is_const_index(e.lhs) and _is_const_index(e.rhs)
    return False


def _check_pred(e, env, diags, where):
    if isinstance(e, BinOp) and e.op in ("and", "or"):
        _check_pred(e.lhs, env, diags, where)
        _check_pred(e.rhs, env, diags, where)
    elif isinstance(e, BinOp) and e.op in ("==", "!=", "<", "<=", ">", ">="):
        _check_index(e.lhs, env, diags, where)
        _check_index(e.rhs, env, diags, where)
    else:
        diags.append(f"{where}: expected a comparison")
