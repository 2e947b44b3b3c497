"""C99 emission for scheduled procedures.

Calling convention: size arguments come first as `int64_t`, then every
numeric argument as a pointer (scalars too, so they can be written), in
declaration order.  Buffers are row-major, zero-based and contiguous.
Buffers in a vector memory are arrays of the memory's C vector type with
the last dimension folded into the vector lanes.
"""

from dataclasses import dataclass, field

from .errors import BackendError
from .ir import (
    DEFAULT_MEM,
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
    int_const,
)
from .memory import memory_info
from .printer import decimal_str, print_expr
from .wellformed import check_wellformed

C_TYPES = {"f32": "float", "f64": "double", "i8": "int8_t", "i32": "int32_t"}

# C operator precedence, higher binds tighter
_PREC = {"or": 1, "and": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
_C_OP = {"and": "&&", "or": "||"}


@dataclass
class EmitConfig:
    guard: str = None  # header guard, derived from the proc name if None
    types: dict = field(default_factory=lambda: dict(C_TYPES))
    mem_notes: dict = field(default_factory=dict)  # memory -> comment on declarations
    indent: int = 2
    index_type: str = "int64_t"


def emit_c(p, cfg=None):
    """Return (header, source) text for `p` and the procedures it calls."""
    cfg = cfg or EmitConfig()
    check_backend(p, cfg)
    callees = _callees(p)
    for q in callees:
        check_backend(q, cfg)
    protos = [_prototype(q, cfg) for q in callees] + [_prototype(p, cfg)]
    guard = cfg.guard or f"{p.name.upper()}_H"
    uses_vec = any(_is_vec(m) for q in [p] + callees for m in _mems(q))
    head = [f"#ifndef {guard}", f"#define {guard}", "", "#include <stdint.h>", "#include <stdbool.h>"]
    if uses_vec:
        head.append("#include <immintrin.h>")
    head += ["", protos[-1] + ";", "", f"#endif  // {guard}", ""]
    src = [f'#include "{p.name}.h"', ""]
    for q, proto in zip(callees, protos):
        src += ["static " + proto + ";"]
    if callees:
        src.append("")
    for q, proto in zip(callees, protos):
        src += ["static " + proto + " {"] + _Emitter(q, cfg).body() + ["}", ""]
    src += [protos[-1] + " {"] + _Emitter(p, cfg).body() + ["}", ""]
    return "\n".join(head), "\n".join(src)


# --------------------------------------------------------------------------
# back-end checks


def _mems(p):
    out = [a.mem or DEFAULT_MEM for a in p.args if a.is_numeric]
    out += [s.mem for s in _walk(p.body) if isinstance(s, Alloc)]
    return out


def _walk(stmts):
    for s in stmts:
        yield s
        if isinstance(s, For):
            yield from _walk(s.body)
        elif isinstance(s, If):
            yield from _walk(s.body)
            yield from _walk(s.orelse)


def _is_vec(mem):
    info = memory_info(mem)
    return bool(info and info["c_type"])


def _callees(p):
    """Non-instruction procedures reachable from `p`, callees first."""
    seen, order = {}, []

    def visit(q):
        for s in _walk(q.body):
            if isinstance(s, Call) and s.proc.instr is None:
                c = s.proc
                if c.name in seen:
                    if seen[c.name] != c:
                        raise BackendError(f"two different procedures are named '{c.name}'")
                    continue
                seen[c.name] = c
                visit(c)
                order.append(c)

    visit(p)
    return order


def check_backend(p, cfg=None):
    """Back-end consistency checks; raises BackendError naming the failure."""
    cfg = cfg or EmitConfig()
    diags = check_wellformed(p)
    if diags:
        raise BackendError(f"'{p.name}' is not well formed: {diags[0]}")
    env = _env(p)
    for a in p.args:
        if a.is_numeric:
            _check_mem(a.mem or DEFAULT_MEM, a.typ, a.dims, a.name, cfg)
    _check_block(p.body, env, cfg, p.name)


def _env(p):
    env = {}
    for a in p.args:
        env[a.name] = (a.typ, a.dims, a.mem or DEFAULT_MEM)
    return env


def _check_mem(mem, typ, dims, name, cfg):
    info = memory_info(mem)
    if info is None:
        raise BackendError(f"memory check: '{name}' lives in unknown memory '{mem}'")
    if typ not in cfg.types:
        raise BackendError(f"type check: no C type for '{typ}' ('{name}')")
    if info["c_type"]:
        if info["elem"] and info["elem"] != typ:
            raise BackendError(f"memory check: '{name}' is {typ} but {mem} holds {info['elem']}")
        if not dims or int_const(dims[-1]) != info["lanes"]:
            raise BackendError(f"memory check: the last dimension of '{name}' must be {info['lanes']} lanes of {mem}")


def _check_block(stmts, env, cfg, where):
    env = dict(env)
    for s in stmts:
        if isinstance(s, Alloc):
            _check_mem(s.mem, s.typ, s.dims, s.name, cfg)
            env[s.name] = (s.typ, s.dims, s.mem)
        elif isinstance(s, (Assign, Reduce)):
            dest = env.get(s.name)
            if dest is None:
                raise BackendError(f"'{s.name}' is not declared in {where}")
            for t, n in _value_types(s.rhs, env):
                if t != dest[0]:
                    raise BackendError(
                        f"precision check: '{n}' is {t} but is stored into {dest[0]} '{s.name}' in {where}"
                    )
        elif isinstance(s, For):
            inner = dict(env)
            inner[s.iter] = ("index", (), None)
            _check_block(s.body, inner, cfg, where)
        elif isinstance(s, If):
            _check_block(s.body, env, cfg, where)
            _check_block(s.orelse, env, cfg, where)
        elif isinstance(s, Call):
            _check_call(s, env, where)


def _value_types(e, env):
    """(type, buffer) for every numeric buffer read that feeds a value."""
    if isinstance(e, Read):
        t = env.get(e.name)
        if t and t[0] in C_TYPES:
            yield t[0], e.name
    elif isinstance(e, BinOp):
        yield from _value_types(e.lhs, env)
        yield from _value_types(e.rhs, env)
    elif isinstance(e, USub):
        yield from _value_types(e.arg, env)


def _check_call(s, env, where):
    callee = s.proc
    if len(s.args) != len(callee.args):
        raise BackendError(f"call check: '{callee.name}' takes {len(callee.args)} arguments, got {len(s.args)}")
    for formal, actual in zip(callee.args, s.args):
        if not formal.is_numeric:
            continue
        fmem = formal.mem or DEFAULT_MEM
        if isinstance(actual, Const):
            if formal.dims:
                raise BackendError(f"call check: a constant is passed for buffer '{formal.name}' of '{callee.name}'")
            continue
        if not isinstance(actual, (Read, WindowExpr)) or actual.name not in env:
            raise BackendError(f"call check: bad argument for '{formal.name}' of '{callee.name}'")
        typ, _, mem = env[actual.name]
        if typ != formal.typ:
            raise BackendError(
                f"precision check: '{actual.name}' is {typ} but '{callee.name}' expects {formal.typ} for '{formal.name}'"
            )
        if formal.dims and mem != fmem:
            raise BackendError(
                f"memory check: '{actual.name}' is in {mem} but '{callee.name}' expects {fmem} for '{formal.name}'"
            )


# --------------------------------------------------------------------------
# emission


def _prototype(p, cfg):
    parts = [f"{cfg.index_type} {a.name}" for a in p.args if a.is_size]
    for a in p.args:
        if a.is_numeric:
            note = cfg.mem_notes.get(a.mem or DEFAULT_MEM)
            parts.append(f"{cfg.types[a.typ]} *{a.name}" + (f" /* {note} */" if note else ""))
    return f"void {p.name}({', '.join(parts) or 'void'})"


class _Emitter:
    def __init__(self, p, cfg):
        self.p = p
        self.cfg = cfg
        self.env = {}
        for a in p.args:
            if a.is_size:
                self.env[a.name] = ("size", (), None, False)
            elif a.is_numeric:
                # numeric arguments are pointers
                self.env[a.name] = (a.typ, a.dims, a.mem or DEFAULT_MEM, True)
        self.lines = []

    def body(self):
        for e in self.p.preds:
            self.out(1, f"// assert {print_expr(e)}")
        self.block(self.p.body, 1)
        return self.lines

    def out(self, depth, text):
        self.lines.append(" " * (self.cfg.indent * depth) + text)

    def block(self, stmts, depth):
        saved = dict(self.env)
        for s in stmts:
            self.stmt(s, depth)
        self.env = saved

    def stmt(self, s, d):
        if isinstance(s, Pass):
            return
        if isinstance(s, Alloc):
            self.alloc(s, d)
        elif isinstance(s, Assign):
            self.out(d, f"{self.access(s.name, s.idx)} = {self.expr(s.rhs, self._typ(s.name))};")
        elif isinstance(s, Reduce):
            self.out(d, f"{self.access(s.name, s.idx)} += {self.expr(s.rhs, self._typ(s.name))};")
        elif isinstance(s, For):
            if s.parallel:
                self.out(d, "// #pragma omp parallel for")
            it = s.iter
            self.out(d, f"for ({self.cfg.index_type} {it} = {self.expr(s.lo)}; {it} < {self.expr(s.hi)}; {it}++) {{")
            self.env[it] = ("index", (), None, False)
            self.block(s.body, d + 1)
            del self.env[it]
            self.out(d, "}")
        elif isinstance(s, If):
            self.out(d, f"if ({self.expr(s.cond)}) {{")
            self.block(s.body, d + 1)
            if s.orelse:
                self.out(d, "} else {")
                self.block(s.orelse, d + 1)
            self.out(d, "}")
        elif isinstance(s, Call):
            self.call(s, d)
        else:
            raise BackendError(f"cannot emit a {type(s).__name__}")

    def _typ(self, name):
        return self.env[name][0]

    def alloc(self, s, d):
        self.env[s.name] = (s.typ, s.dims, s.mem, False)
        info = memory_info(s.mem)
        note = self.cfg.mem_notes.get(s.mem)
        tail = f"  // {note}" if note else ""
        if info and info["c_type"]:
            outer = s.dims[:-1]
            ext = f"[{self.flat_size(outer)}]" if outer else ""
            self.out(d, f"{info['c_type']} {s.name}{ext};{tail}")
        elif s.dims:
            self.out(d, f"{self.cfg.types[s.typ]} {s.name}[{self.flat_size(s.dims)}];{tail}")
        else:
            self.out(d, f"{self.cfg.types[s.typ]} {s.name};{tail}")

    def flat_size(self, dims):
        e = dims[0]
        for x in dims[1:]:
            e = BinOp("*", e, x)
        return self.expr(e)

    # -- buffer access

    def offset(self, dims, idx):
        """Row-major offset of `idx` into a buffer of shape `dims`."""
        terms = []
        for k, i in enumerate(idx):
            if int_const(i) == 0:
                continue
            stride = None
            for x in dims[k + 1 :]:
                stride = x if stride is None else BinOp("*", stride, x)
            if stride is None or int_const(stride) == 1:
                terms.append(self.expr(i, prec=5))
            else:
                terms.append(f"{self.expr(i, prec=6)} * {self.expr(stride, prec=6)}")
        return " + ".join(terms) if terms else "0"

    def access(self, name, idx):
        typ, dims, mem, ptr = self.env[name]
        if _is_vec(mem):
            ctype = self.cfg.types[typ]
            vec = self.vec_ref(name, dims, idx[:-1])
            return f"(({ctype} *)&{vec})[{self.expr(idx[-1])}]"
        if not dims:
            return f"*{name}" if ptr else name
        return f"{name}[{self.offset(dims, idx)}]"

    def vec_ref(self, name, dims, outer):
        if len(dims) == 1:
            return name
        return f"{name}[{self.offset(dims[:-1], outer)}]"

    # -- calls

    def call(self, s, d):
        callee = s.proc
        if callee.instr is not None:
            holes = [self.instr_arg(f, a, callee) for f, a in zip(callee.args, s.args)]
            try:
                text = callee.instr.format(*holes)
            except (IndexError, KeyError) as e:
                raise BackendError(f"template of '{callee.name}' has a bad hole: {e}")
            for line in text.splitlines():
                self.out(d, line)
            return
        args = [self.expr(a) for f, a in zip(callee.args, s.args) if f.is_size]
        for f, a in zip(callee.args, s.args):
            if f.is_numeric:
                args.append(self.pointer_arg(f, a, callee))
        self.out(d, f"{callee.name}({', '.join(args)});")

    def _window_start(self, a):
        return tuple(i.lo if isinstance(i, Interval) else i for i in a.idx)

    def instr_arg(self, formal, a, callee):
        if not formal.is_numeric:
            return self.expr(a, prec=7)
        if not formal.dims:
            return self.expr(a, formal.typ)
        typ, dims, mem, ptr = self.env[a.name]
        if _is_vec(mem):
            idx = a.idx
            if idx and isinstance(idx[-1], Interval):
                if int_const(idx[-1].lo) != 0:
                    raise BackendError(f"'{callee.name}' needs whole vectors of '{a.name}'")
                idx = idx[:-1]
            elif idx:
                raise BackendError(f"'{callee.name}' needs whole vectors of '{a.name}'")
            return self.vec_ref(a.name, dims, idx)
        # element lvalue; templates take its address
        start = self._window_start(a) if isinstance(a, WindowExpr) else a.idx
        if not dims:
            return f"*{a.name}" if ptr else a.name
        if not start:
            start = tuple(Const(0) for _ in dims)
        return f"{a.name}[{self.offset(dims, start)}]"

    def pointer_arg(self, formal, a, callee):
        if isinstance(a, Const):
            return f"&({self.cfg.types[formal.typ]}){{{self.expr(a, formal.typ)}}}"
        typ, dims, mem, ptr = self.env[a.name]
        if _is_vec(mem):
            raise BackendError(f"vector buffer '{a.name}' can only be passed to instructions")
        if not dims:
            return a.name if ptr else f"&{a.name}"
        start = self._window_start(a) if isinstance(a, WindowExpr) else a.idx
        if not start:
            return a.name
        return f"&{a.name}[{self.offset(dims, start)}]"

    # -- expressions

    def expr(self, e, typ=None, prec=0):
        if isinstance(e, Const):
            return self.const(e, typ)
        if isinstance(e, Read):
            if e.name in self.env and self.env[e.name][0] in C_TYPES:
                return self.access(e.name, e.idx)
            return e.name
        if isinstance(e, USub):
            return f"-{self.expr(e.arg, typ, 7)}"
        if isinstance(e, BinOp):
            mine = _PREC[e.op]
            if e.op in ("==", "!=", "<", "<=", ">", ">="):
                typ = None
            text = f"{self.expr(e.lhs, typ, mine)} {_C_OP.get(e.op, e.op)} {self.expr(e.rhs, typ, mine + 1)}"
            return f"({text})" if mine < prec else text
        raise BackendError(f"cannot emit expression {print_expr(e)}")

    def const(self, e, typ):
        v = e.val
        suffix = "f" if typ == "f32" else ""
        if typ in ("f32", "f64") or e.real:
            text = decimal_str(v)
            if text is None:
                return f"({v.numerator}.0{suffix} / {v.denominator}.0{suffix})"
            return text + suffix
        if v.denominator != 1:
            return f"({v.numerator}.0 / {v.denominator}.0)"
        return str(v.numerator)
