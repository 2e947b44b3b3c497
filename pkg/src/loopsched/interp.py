"""Exact-rational reference interpreter and randomized equivalence checking.

Procedures are compiled once to nested Python closures and cached on the
procedure object.  Buffers hold `Fraction` values, with `None` marking
cells never written.  Index arithmetic is plain integers with floor
division and modulus.
"""

import json
import operator
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import prod

from .errors import InstanceError, InternalError, RuntimeFault
from .ir import (
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    For,
    If,
    Interval,
    Pass,
    Read,
    Reduce,
    USub,
    WindowExpr,
)


# --------------------------------------------------------------------------
# storage


class Buffer:
    __slots__ = ("name", "dims", "strides", "data")

    def __init__(self, name, dims, data=None):
        self.name = name
        self.dims = tuple(dims)
        strides = []
        s = 1
        for d in reversed(self.dims):
            strides.append(s)
            s *= d
        self.strides = tuple(reversed(strides))
        self.data = list(data) if data is not None else [None] * s

    def flat(self, idx, path):
        if len(idx) != len(self.dims):
            raise RuntimeFault(f"'{self.name}' indexed with {len(idx)} indices, has {len(self.dims)} dims", path)
        off = 0
        for i, d, s in zip(idx, self.dims, self.strides):
            if not 0 <= i < d:
                raise RuntimeFault(f"out-of-bounds access {self.name}{list(idx)} (shape {list(self.dims)})", path)
            off += i * s
        return off

    def read(self, idx, path):
        v = self.data[self.flat(idx, path)]
        if v is None:
            raise RuntimeFault(f"read of uninitialized {self.name}{list(idx)}", path)
        return v

    def write(self, idx, val, path):
        self.data[self.flat(idx, path)] = val

    def reduce(self, idx, val, path):
        k = self.flat(idx, path)
        old = self.data[k]
        if old is None:
            raise RuntimeFault(f"reduction into uninitialized {self.name}{list(idx)}", path)
        self.data[k] = old + val


class View:
    """A window onto another buffer: some dims fixed, others offset."""

    __slots__ = ("name", "base", "spec", "dims")

    def __init__(self, name, base, spec):
        # spec: per base dim, ("iv", lo, extent) or ("pt", value)
        self.name = name
        self.base = base
        self.spec = spec
        self.dims = tuple(s[2] for s in spec if s[0] == "iv")

    def _map(self, idx, path):
        if len(idx) != len(self.dims):
            raise RuntimeFault(f"'{self.name}' indexed with {len(idx)} indices, has {len(self.dims)} dims", path)
        out = []
        it = iter(idx)
        for s in self.spec:
            if s[0] == "iv":
                i = next(it)
                if not 0 <= i < s[2]:
                    raise RuntimeFault(f"out-of-bounds window access {self.name}{list(idx)} (shape {list(self.dims)})", path)
                out.append(s[1] + i)
            else:
                out.append(s[1])
        return tuple(out)

    def read(self, idx, path):
        return self.base.read(self._map(idx, path), path)

    def write(self, idx, val, path):
        self.base.write(self._map(idx, path), val, path)

    def reduce(self, idx, val, path):
        self.base.reduce(self._map(idx, path), val, path)


# --------------------------------------------------------------------------
# compilation of expressions


_CMP = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _cidx(e, path):
    """Compile an index/size/bool expression to env -> int|bool."""
    if isinstance(e, Const):
        v = int(e.val)
        return lambda env: v
    if isinstance(e, Read):
        n = e.name

        def rd(env):
            try:
                return env[n]
            except KeyError:
                raise RuntimeFault(f"unbound index variable '{n}'", path) from None

        return rd
    if isinstance(e, USub):
        f = _cidx(e.arg, path)
        return lambda env: -f(env)
    if isinstance(e, BinOp):
        a, b = _cidx(e.lhs, path), _cidx(e.rhs, path)
        op = e.op
        if op == "+":
            return lambda env: a(env) + b(env)
        if op == "-":
            return lambda env: a(env) - b(env)
        if op == "*":
            return lambda env: a(env) * b(env)
        if op in ("/", "%"):

            def dm(env):
                d = b(env)
                if d == 0:
                    raise RuntimeFault("index division by zero", path)
                return a(env) // d if op == "/" else a(env) % d

            return dm
        if op == "and":
            return lambda env: a(env) and b(env)
        if op == "or":
            return lambda env: a(env) or b(env)
        if op in _CMP:
            f = _CMP[op]
            return lambda env: f(a(env), b(env))
    raise InternalError(f"cannot evaluate {type(e).__name__} as an index")


def _cnum(e, path):
    """Compile a numeric expression to env -> Fraction."""
    if isinstance(e, Const):
        v = e.val
        return lambda env: v
    if isinstance(e, Read):
        n = e.name
        if not e.idx:

            def rd0(env):
                b = env[n]
                if isinstance(b, (Buffer, View)):
                    return b.read((), path)
                return Fraction(b)

            return rd0
        fs = [_cidx(i, path) for i in e.idx]
        if len(fs) == 1:
            f0 = fs[0]
            return lambda env: env[n].read((f0(env),), path)
        if len(fs) == 2:
            f0, f1 = fs
            return lambda env: env[n].read((f0(env), f1(env)), path)
        return lambda env: env[n].read(tuple(f(env) for f in fs), path)
    if isinstance(e, USub):
        f = _cnum(e.arg, path)
        return lambda env: -f(env)
    if isinstance(e, BinOp):
        a, b = _cnum(e.lhs, path), _cnum(e.rhs, path)
        op = e.op
        if op == "+":
            return lambda env: a(env) + b(env)
        if op == "-":
            return lambda env: a(env) - b(env)
        if op == "*":
            return lambda env: a(env) * b(env)
        if op == "/":

            def dv(env):
                d = b(env)
                if d == 0:
                    raise RuntimeFault("division by zero", path)
                return a(env) / d

            return dv
    raise InternalError(f"cannot evaluate {type(e).__name__} as a number")


# --------------------------------------------------------------------------
# compilation of statements


def _cblock(stmts, prefix, label):
    fns = [_cstmt(s, prefix + ((label, k),)) for k, s in enumerate(stmts)]
    allocs = [s.name for s in stmts if isinstance(s, Alloc)]
    if len(fns) == 1 and not allocs:
        return fns[0]

    def run(env):
        for f in fns:
            f(env)
        for a in allocs:
            env.pop(a, None)

    return run


def _cstmt(s, path):
    if isinstance(s, For):
        lo, hi = _cidx(s.lo, path), _cidx(s.hi, path)
        body = _cblock(s.body, path, "body")
        it = s.iter

        def run_for(env):
            for v in range(lo(env), hi(env)):
                env[it] = v
                body(env)
            env.pop(it, None)

        return run_for
    if isinstance(s, If):
        c = _cidx(s.cond, path)
        body = _cblock(s.body, path, "body")
        orelse = _cblock(s.orelse, path, "orelse") if s.orelse else None

        def run_if(env):
            if c(env):
                body(env)
            elif orelse is not None:
                orelse(env)

        return run_if
    if isinstance(s, (Assign, Reduce)):
        rhs = _cnum(s.rhs, path)
        fs = [_cidx(i, path) for i in s.idx]
        n = s.name
        if isinstance(s, Assign):

            def run_assign(env):
                v = rhs(env)
                env[n].write(tuple(f(env) for f in fs), v, path)

            return run_assign

        def run_reduce(env):
            v = rhs(env)
            env[n].reduce(tuple(f(env) for f in fs), v, path)

        return run_reduce
    if isinstance(s, Alloc):
        ds = [_cidx(d, path) for d in s.dims]
        n = s.name

        def run_alloc(env):
            dims = [f(env) for f in ds]
            if any(d < 0 for d in dims):
                raise RuntimeFault(f"negative dimension in allocation of '{n}'", path)
            env[n] = Buffer(n, dims)

        return run_alloc
    if isinstance(s, Pass):
        return lambda env: None
    if isinstance(s, Call):
        return _ccall(s, path)
    raise InternalError(f"cannot execute {type(s).__name__}")


def _ccall(s, path):
    callee = s.proc
    binders = []
    for formal, actual in zip(callee.args, s.args):
        binders.append(_cbind(formal, actual, path))

    def run_call(env):
        cenv = {}
        for name, b in binders:
            cenv[name] = b(env)
        _run_proc(callee, cenv, path)

    return run_call


def _cbind(formal, actual, path):
    name = formal.name
    if formal.is_size:
        f = _cidx(actual, path)
        return name, f
    if formal.dims:
        if isinstance(actual, WindowExpr):
            parts = []
            for i in actual.idx:
                if isinstance(i, Interval):
                    parts.append(("iv", _cidx(i.lo, path), _cidx(i.hi, path)))
                else:
                    parts.append(("pt", _cidx(i, path)))
            bn = actual.name

            def mk_view(env):
                base = env[bn]
                spec = []
                for part in parts:
                    if part[0] == "iv":
                        lo, hi = part[1](env), part[2](env)
                        if hi < lo:
                            raise RuntimeFault(f"empty window on '{bn}'", path)
                        spec.append(("iv", lo, hi - lo))
                    else:
                        spec.append(("pt", part[1](env)))
                for sp, d in zip(spec, base.dims):
                    lo = sp[1]
                    hi = lo + (sp[2] if sp[0] == "iv" else 1)
                    if lo < 0 or hi > d:
                        raise RuntimeFault(f"window on '{bn}' exceeds its bounds", path)
                return View(name, base, spec)

            return name, mk_view
        # whole buffer passed by name
        bn = actual.name
        return name, lambda env: env[bn]
    # scalar numeric formal
    if isinstance(actual, Read):
        bn = actual.name
        fs = [_cidx(i, path) for i in actual.idx]

        def mk_cell(env):
            base = env[bn]
            if not isinstance(base, (Buffer, View)):
                b = Buffer(name, ())
                b.data[0] = Fraction(base)
                return b
            if not fs:
                return base
            return View(name, base, [("pt", f(env)) for f in fs])

        return name, mk_cell
    fv = _cnum(actual, path)

    def mk_const(env):
        b = Buffer(name, ())
        b.data[0] = fv(env)
        return b

    return name, mk_const


def _compiled(p):
    c = p.__dict__.get("_compiled")
    if c is None:
        preds = [(_cidx(pr, ()), pr) for pr in p.preds]
        c = (preds, _cblock(p.body, (), "body"))
        object.__setattr__(p, "_compiled", c)
    return c


def _run_proc(p, env, call_path=None):
    preds, body = _compiled(p)
    for f, pr in preds:
        if not f(env):
            from .printer import print_expr

            raise RuntimeFault(f"assertion '{print_expr(pr)}' of '{p.name}' failed", call_path, p.name)
    # dims of buffer formals must agree with what was passed
    for a in p.args:
        if a.dims:
            want = tuple(_cidx(d, ())(env) for d in a.dims)
            got = env[a.name].dims
            if want != tuple(got):
                raise RuntimeFault(
                    f"argument '{a.name}' of '{p.name}' has shape {list(got)}, expected {list(want)}", call_path, p.name
                )
    try:
        body(env)
    except RuntimeFault as f:
        if f.proc is None:
            f.proc = p.name
        raise


# --------------------------------------------------------------------------
# public API


@dataclass
class Instance:
    sizes: dict
    buffers: dict  # name -> flat list of Fraction
    seed: object = None

    def to_json(self):
        return json.dumps(
            {
                "sizes": self.sizes,
                "buffers": {k: [str(v) for v in vals] for k, vals in self.buffers.items()},
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        bufs = {k: [Fraction(v) for v in vals] for k, vals in d.get("buffers", {}).items()}
        return cls(dict(d.get("sizes", {})), bufs, d.get("seed"))


def buffer_dims(p, sizes):
    out = {}
    for a in p.args:
        if a.is_numeric:
            out[a.name] = tuple(_cidx(d, ())(sizes) for d in a.dims)
    return out


def interpret(p, inst):
    """Run `p` on `inst`; returns {buffer name: (dims, values)} for all
    numeric parameters."""
    env = {}
    for a in p.args:
        if a.is_size:
            if a.name not in inst.sizes:
                raise InstanceError(f"instance has no value for size '{a.name}'")
            v = inst.sizes[a.name]
            if v < 0:
                raise InstanceError(f"size '{a.name}' is negative")
            env[a.name] = int(v)
    dims = buffer_dims(p, env)
    bufs = {}
    for a in p.args:
        if a.is_numeric:
            if a.name not in inst.buffers:
                raise InstanceError(f"instance has no data for buffer '{a.name}'")
            data = [Fraction(x) for x in inst.buffers[a.name]]
            if len(data) != prod(dims[a.name]):
                raise InstanceError(
                    f"buffer '{a.name}' needs {prod(dims[a.name])} values, got {len(data)}"
                )
            b = Buffer(a.name, dims[a.name], data)
            bufs[a.name] = b
            env[a.name] = b
    _run_proc(p, env)
    return {n: (b.dims, tuple(b.data)) for n, b in bufs.items()}


def eval_pred_closed(e):
    """Truth value of a variable-free predicate, or None if it has names."""
    from .ir import expr_names

    if expr_names(e):
        return None
    return bool(_cidx(e, ())({}))


def _pred_ok(p, sizes):
    try:
        return all(f(sizes) for f, _ in _compiled(p)[0])
    except RuntimeFault:
        return False


def _divisors(p):
    """{size name: modulus} from asserts shaped like `N % c == 0`."""
    out = {}
    for pr in p.preds:
        for c in _conjuncts(pr):
            if (
                isinstance(c, BinOp)
                and c.op == "=="
                and isinstance(c.rhs, Const)
                and c.rhs.val == 0
                and isinstance(c.lhs, BinOp)
                and c.lhs.op == "%"
                and isinstance(c.lhs.lhs, Read)
                and isinstance(c.lhs.rhs, Const)
            ):
                n, m = c.lhs.lhs.name, int(c.lhs.rhs.val)
                out[n] = m * out.get(n, 1) // _gcd(m, out.get(n, 1))
    return out


def _gcd(a, b):
    from math import gcd

    return gcd(a, b)


def _conjuncts(e):
    if isinstance(e, BinOp) and e.op == "and":
        return _conjuncts(e.lhs) + _conjuncts(e.rhs)
    return [e]


def _fit(v, m, lo, hi):
    """A multiple of m near v, preferring [lo, hi] and rounding up."""
    up = -(-v // m) * m
    if lo <= up <= hi:
        return up
    down = (v // m) * m
    if lo <= down <= hi and down >= 0:
        return down
    inside = [k for k in range(lo, hi + 1) if k % m == 0 and k >= 0]
    if inside:
        return inside[0]
    return up


def random_instance(p, seed=0, size_range=(1, 12), extra_preds=()):
    """Draw sizes that satisfy the asserts, then small rational buffers."""
    lo, hi = size_range
    if lo > hi:
        raise InstanceError("empty size range")
    rng = random.Random(seed)
    size_names = [a.name for a in p.args if a.is_size]
    mods = {}
    for q in (p,) + tuple(extra_preds):
        for n, m in _divisors(q).items():
            mods[n] = m * mods.get(n, 1) // _gcd(m, mods.get(n, 1))
    checks = (p,) + tuple(extra_preds)
    sizes = None
    for _ in range(200):
        cand = {}
        for n in size_names:
            v = rng.randint(lo, hi)
            if n in mods:
                v = _fit(v, mods[n], lo, hi)
            cand[n] = v
        if all(_pred_ok(q, cand) for q in checks):
            sizes = cand
            break
    if sizes is None:
        # last resort: scan the box in order
        import itertools

        ranges = []
        for n in size_names:
            ranges.append(range(max(lo, 0), hi + 1))
        for combo in itertools.islice(itertools.product(*ranges), 100000):
            cand = dict(zip(size_names, combo))
            if all(_pred_ok(q, cand) for q in checks):
                sizes = cand
                break
    if sizes is None:
        raise InstanceError(f"no sizes in [{lo}, {hi}] satisfy the asserts of '{p.name}'")
    dims = buffer_dims(p, sizes)
    bufs = {}
    for a in p.args:
        if a.is_numeric:
            n = prod(dims[a.name])
            bufs[a.name] = [Fraction(rng.randint(-8, 8), rng.choice((1, 2, 3))) for _ in range(n)]
    return Instance(sizes, bufs, seed)


@dataclass
class EquivReport:
    equal: bool
    trials: int
    counterexamples: list = field(default_factory=list)  # (instance, [buffer names])

    def __bool__(self):
        return self.equal

    def summary(self):
        if self.equal:
            return f"equal on {self.trials} trials"
        inst, names = self.counterexamples[0]
        return f"outputs differ in {', '.join(names)} at sizes {inst.sizes} (seed {inst.seed})"


def signature(p):
    return tuple((a.name, a.typ, a.dims) for a in p.args)


def check_equiv(p1, p2, trials=20, seed=0, size_range=(1, 12), stop_at_first=True):
    """Run both procedures on the same random instances and compare."""
    s1 = tuple((a.name, a.is_size, len(a.dims)) for a in p1.args)
    s2 = tuple((a.name, a.is_size, len(a.dims)) for a in p2.args)
    if s1 != s2:
        raise InstanceError(f"'{p1.name}' and '{p2.name}' have different parameter lists")
    rep = EquivReport(True, 0)
    for t in range(trials):
        inst = random_instance(p1, seed=seed * 100003 + t, size_range=size_range, extra_preds=(p2,))
        out = []
        for which, p in (("first", p1), ("second", p2)):
            try:
                out.append(interpret(p, inst))
            except RuntimeFault as f:
                f.which = which
                f.args = (f"{which} procedure '{p.name}' faulted: {f.args[0]}",)
                raise
        rep.trials += 1
        if out[0] != out[1]:
            diff = sorted(n for n in out[0] if out[0][n] != out[1].get(n))
            rep.equal = False
            rep.counterexamples.append((inst, diff))
            if stop_at_first:
                break
    return rep
