"""Canonical text form of procedures (2-space indentation)."""

import json
from fractions import Fraction

from .ir import (
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
    Procedure,
    Read,
    Reduce,
    StmtHole,
    USub,
    WindowExpr,
)

PREC = {
    "or": 1,
    "and": 2,
    "==": 3,
    "!=": 3,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "+": 4,
    "-": 4,
    "*": 5,
    "/": 5,
    "%": 5,
}
UNARY_PREC = 6


def format_const(c):
    v = c.val
    if not c.real:
        if v.denominator == 1:
            return str(v.numerator)
        return f"({v.numerator}/{v.denominator})"
    dec = decimal_str(v)
    if dec is None:
        return f"({v.numerator}.0/{v.denominator}.0)"
    return dec


def decimal_str(v: Fraction):
    d = v.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return None
    digits = max(twos, fives)
    scaled = abs(v) * 10**digits
    assert scaled.denominator == 1
    s = str(scaled.numerator).rjust(digits + 1, "0")
    whole, frac = s[: len(s) - digits], s[len(s) - digits :]
    out = f"{whole}.{frac or '0'}"
    return "-" + out if v < 0 else out


def print_expr(e, prec=0):
    if isinstance(e, Const):
        s = format_const(e)
        if e.val < 0 and prec >= UNARY_PREC - 1:
            return f"({s})"
        return s
    if isinstance(e, Read):
        if not e.idx:
            return e.name
        return f"{e.name}[{', '.join(print_expr(i) for i in e.idx)}]"
    if isinstance(e, WindowExpr):
        return f"{e.name}[{', '.join(print_expr(i) for i in e.idx)}]"
    if isinstance(e, Interval):
        return f"{print_expr(e.lo)}:{print_expr(e.hi)}"
    if isinstance(e, Hole):
        return "_"
    if isinstance(e, USub):
        s = "-" + print_expr(e.arg, UNARY_PREC)
        return f"({s})" if prec > UNARY_PREC else s
    if isinstance(e, BinOp):
        p = PREC[e.op]
        lhs = print_expr(e.lhs, p)
        # right operands of the same precedence need parens to keep the tree
        rhs = print_expr(e.rhs, p + 1)
        s = f"{lhs} {e.op} {rhs}"
        return f"({s})" if p < prec else s
    raise TypeError(f"not an expression: {e!r}")


def print_type(typ, dims):
    if dims:
        return f"{typ}[{', '.join(print_expr(d) for d in dims)}]"
    return typ


def print_stmt(s, indent=0):
    return "\n".join(_stmt_lines(s, indent))


def print_block(stmts, indent=0):
    lines = []
    for s in stmts:
        lines.extend(_stmt_lines(s, indent))
    return "\n".join(lines)


def _stmt_lines(s, ind):
    pad = "  " * ind
    if isinstance(s, For):
        kw = "par" if s.parallel else "seq"
        lines = [f"{pad}for {s.iter} in {kw}({print_expr(s.lo)}, {print_expr(s.hi)}):"]
        for b in s.body:
            lines.extend(_stmt_lines(b, ind + 1))
        return lines
    if isinstance(s, If):
        lines = [f"{pad}if {print_expr(s.cond)}:"]
        for b in s.body:
            lines.extend(_stmt_lines(b, ind + 1))
        if s.orelse:
            lines.append(f"{pad}else:")
            for b in s.orelse:
                lines.extend(_stmt_lines(b, ind + 1))
        return lines
    if isinstance(s, (Assign, Reduce)):
        op = "=" if isinstance(s, Assign) else "+="
        lhs = s.name
        if s.idx:
            lhs += f"[{', '.join(print_expr(i) for i in s.idx)}]"
        return [f"{pad}{lhs} {op} {print_expr(s.rhs)}"]
    if isinstance(s, Alloc):
        return [f"{pad}{s.name}: {print_type(s.typ, s.dims)} @{s.mem}"]
    if isinstance(s, Pass):
        return [f"{pad}pass"]
    if isinstance(s, Call):
        return [f"{pad}{s.proc.name}({', '.join(print_expr(a) for a in s.args)})"]
    if isinstance(s, StmtHole):
        return [f"{pad}_"]
    raise TypeError(f"not a statement: {s!r}")


def print_arg(a):
    s = f"{a.name}: {print_type(a.typ, a.dims)}"
    if a.mem is not None:
        s += f" @{a.mem}"
    return s


def print_proc(p: Procedure) -> str:
    lines = []
    if p.instr is not None:
        lines.append(f"@instr({json.dumps(p.instr)})")
    lines.append(f"proc {p.name}({', '.join(print_arg(a) for a in p.args)}):")
    for pred in p.preds:
        lines.append(f"  assert {print_expr(pred)}")
    for s in p.body:
        lines.extend(_stmt_lines(s, 1))
    return "\n".join(lines) + "\n"


def print_procs(procs) -> str:
    """Print procedures, callees first, each exactly once."""
    seen = []

    def visit(p):
        if any(q is p or q == p for q in seen):
            return
        from .ir import walk_stmts

        for s in walk_stmts(p.body):
            if isinstance(s, Call):
                visit(s.proc)
        seen.append(p)

    for p in procs:
        visit(p)
    return "\n".join(print_proc(p) for p in seen)
