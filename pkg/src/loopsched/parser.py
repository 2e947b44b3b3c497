"""Parser for the object language and for search patterns.

The surface syntax is indentation sensitive.  Physical lines are joined
while brackets are open, so multi-line parameter lists work.  In pattern
mode `_` is a wildcard for an expression, a statement, a loop range or a
whole body.
"""

import json
import re
from fractions import Fraction

from .errors import ParseError, WellFormednessError
from .ir import (
    INDEX_TYPES,
    NUMERIC_TYPES,
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    DEFAULT_MEM,
    FnArg,
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

TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>\d+\.\d*|\d*\.\d+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\+=|==|!=|<=|>=|[-+*/%()\[\],:=<>@])
    """,
    re.VERBOSE,
)

KEYWORDS = {"for", "in", "seq", "par", "if", "else", "pass", "assert", "and", "or", "proc", "def"}


class Tok:
    __slots__ = ("kind", "val", "line", "col")

    def __init__(self, kind, val, line, col):
        self.kind, self.val, self.line, self.col = kind, val, line, col

    def __repr__(self):
        return f"Tok({self.kind},{self.val!r})"


def _strip_comment(line):
    out = []
    in_str = False
    i = 0
    while i < len(line):
        ch = line[i]
        if in_str:
            out.append(ch)
            if ch == "\\" and i + 1 < len(line):
                out.append(line[i + 1])
                i += 1
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
            out.append(ch)
        elif ch == "#":
            break
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def tokenize_line(text, lineno, col0=0):
    toks = []
    pos = 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", lineno, col0 + pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Tok(kind, m.group(), lineno, col0 + pos + 1))
        pos = m.end()
    return toks


def logical_lines(text):
    """Yield (indent, tokens, lineno) with bracket continuation joined."""
    out = []
    pending = None
    depth = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        stripped = line.lstrip(" ")
        if "\t" in line[: len(line) - len(stripped)]:
            raise ParseError("tabs are not allowed in indentation", lineno, 1)
        indent = len(line) - len(stripped)
        toks = tokenize_line(stripped, lineno, indent)
        if pending is None:
            pending = (indent, toks, lineno)
        else:
            pending = (pending[0], pending[1] + toks, pending[2])
        for t in toks:
            if t.kind == "op" and t.val in "([":
                depth += 1
            elif t.kind == "op" and t.val in ")]":
                depth -= 1
        if depth <= 0:
            out.append(pending)
            pending = None
            depth = 0
    if pending is not None:
        raise ParseError("unclosed bracket at end of input", pending[2], 1)
    return out


class _TokStream:
    def __init__(self, toks, lineno, pattern=False):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.pattern = pattern

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, val, k=0):
        t = self.peek(k)
        return t is not None and t.val == val and t.kind in ("op", "name")

    def next(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of line", self.lineno, None)
        self.i += 1
        return t

    def expect(self, val):
        t = self.peek()
        if t is None or t.val != val:
            got = "end of line" if t is None else repr(t.val)
            line = self.lineno if t is None else t.line
            col = None if t is None else t.col
            raise ParseError(f"expected {val!r}, got {got}", line, col)
        self.i += 1
        return t

    def name(self):
        t = self.next()
        if t.kind != "name" or (t.val in KEYWORDS):
            raise ParseError(f"expected identifier, got {t.val!r}", t.line, t.col)
        return t.val

    def done(self):
        return self.i >= len(self.toks)

    def error(self, msg):
        t = self.peek()
        if t is None:
            raise ParseError(msg, self.lineno, None)
        raise ParseError(msg, t.line, t.col)


# --------------------------------------------------------------------------
# expressions


def parse_expr_tokens(ts):
    return _or(ts)


def _or(ts):
    e = _and(ts)
    while ts.at("or"):
        ts.next()
        e = BinOp("or", e, _and(ts))
    return e


def _and(ts):
    e = _cmp(ts)
    while ts.at("and"):
        ts.next()
        e = BinOp("and", e, _cmp(ts))
    return e


def _cmp(ts):
    e = _arith(ts)
    t = ts.peek()
    if t is not None and t.kind == "op" and t.val in ("==", "!=", "<", "<=", ">", ">="):
        ts.next()
        e = BinOp(t.val, e, _arith(ts))
    return e


def _arith(ts):
    e = _term(ts)
    while True:
        t = ts.peek()
        if t is not None and t.kind == "op" and t.val in ("+", "-"):
            ts.next()
            e = BinOp(t.val, e, _term(ts))
        else:
            return e


def _term(ts):
    e = _unary(ts)
    while True:
        t = ts.peek()
        if t is not None and t.kind == "op" and t.val in ("*", "/", "%"):
            ts.next()
            e = BinOp(t.val, e, _unary(ts))
        else:
            return e


def _unary(ts):
    if ts.at("-"):
        ts.next()
        arg = _unary(ts)
        if isinstance(arg, Const) and arg.val >= 0:
            return Const(-arg.val, arg.real)
        return USub(arg)
    return _atom(ts)


def _atom(ts):
    t = ts.next()
    if t.kind == "number":
        if "." in t.val:
            return Const(Fraction(t.val), True)
        return Const(Fraction(int(t.val)), False)
    if t.kind == "op" and t.val == "(":
        e = _or(ts)
        ts.expect(")")
        return e
    if t.kind == "name":
        if t.val == "_":
            if ts.pattern:
                return Hole()
            raise ParseError("wildcard '_' outside a pattern", t.line, t.col)
        if t.val in KEYWORDS:
            raise ParseError(f"unexpected keyword {t.val!r}", t.line, t.col)
        if ts.at("["):
            idx, window = _index_list(ts)
            if window:
                return WindowExpr(t.val, idx)
            return Read(t.val, idx)
        return Read(t.val)
    raise ParseError(f"unexpected token {t.val!r}", t.line, t.col)


def _index_list(ts):
    ts.expect("[")
    items = []
    window = False
    while True:
        lo = _or(ts)
        if ts.at(":"):
            ts.next()
            hi = _or(ts)
            items.append(Interval(lo, hi))
            window = True
        else:
            items.append(lo)
        if ts.at(","):
            ts.next()
            continue
        ts.expect("]")
        return tuple(items), window


# --------------------------------------------------------------------------
# statements


class _Parser:
    def __init__(self, text, procs=None, pattern=False):
        self.lines = logical_lines(text)
        self.pos = 0
        self.procs = dict(procs or {})
        self.pattern = pattern

    def stream(self, line):
        return _TokStream(line[1], line[2], self.pattern)

    # file level ------------------------------------------------------
    def parse_file(self):
        out = []
        while self.pos < len(self.lines):
            p = self.parse_proc_def()
            self.procs[p.name] = p
            out.append(p)
        return out

    def parse_proc_def(self):
        instr = None
        indent, toks, lineno = self.lines[self.pos]
        ts = self.stream(self.lines[self.pos])
        if ts.at("@"):
            ts.next()
            if ts.name() != "instr":
                ts.error("only @instr(...) decorators are supported")
            ts.expect("(")
            t = ts.next()
            if t.kind != "string":
                raise ParseError("@instr expects a string template", t.line, t.col)
            instr = json.loads(t.val)
            ts.expect(")")
            if not ts.done():
                ts.error("junk after decorator")
            self.pos += 1
            if self.pos >= len(self.lines):
                raise ParseError("decorator without procedure", lineno, 1)
            indent, toks, lineno = self.lines[self.pos]
            ts = self.stream(self.lines[self.pos])
        if indent != 0:
            raise ParseError("procedure must start at column 1", lineno, 1)
        kw = ts.next()
        if kw.val not in ("proc", "def"):
            raise ParseError(f"expected 'proc', got {kw.val!r}", kw.line, kw.col)
        name = ts.name()
        ts.expect("(")
        args = []
        if not ts.at(")"):
            while True:
                args.append(self.parse_param(ts))
                if ts.at(","):
                    ts.next()
                    if ts.at(")"):
                        break
                    continue
                break
        ts.expect(")")
        ts.expect(":")
        self.pos += 1
        preds = []
        body = []
        if not ts.done():
            body = [self.parse_simple(ts)]
        else:
            blk_indent = self._child_indent(0, lineno)
            while self.pos < len(self.lines) and self.lines[self.pos][0] == blk_indent:
                lts = self.stream(self.lines[self.pos])
                if lts.at("assert"):
                    if body:
                        lts.error("asserts must precede statements")
                    lts.next()
                    preds.append(parse_expr_tokens(lts))
                    if not lts.done():
                        lts.error("junk after assert")
                    self.pos += 1
                else:
                    body.extend(self.parse_stmt(blk_indent))
            if self.pos < len(self.lines) and self.lines[self.pos][0] > 0:
                ln = self.lines[self.pos]
                raise ParseError("unexpected indentation", ln[2], ln[0] + 1)
        if not body:
            raise ParseError(f"procedure {name} has an empty body", lineno, 1)
        return Procedure(name, tuple(args), tuple(preds), tuple(body), instr)

    def parse_param(self, ts):
        name = ts.name()
        ts.expect(":")
        typ, dims = self.parse_type(ts)
        mem = None
        if ts.at("@"):
            ts.next()
            mem = ts.name()
        if typ in NUMERIC_TYPES and mem is None:
            mem = DEFAULT_MEM
        if typ in INDEX_TYPES and mem is not None:
            ts.error("size/index parameters take no memory annotation")
        return FnArg(name, typ, dims, mem)

    def parse_type(self, ts):
        t = ts.next()
        if t.val not in NUMERIC_TYPES + INDEX_TYPES:
            raise ParseError(f"unknown type {t.val!r}", t.line, t.col)
        dims = ()
        if ts.at("["):
            if t.val in INDEX_TYPES:
                ts.error("size/index values cannot be arrays")
            dims, window = _index_list(ts)
            if window:
                ts.error("slices are not allowed in types")
        return t.val, dims

    # blocks ------------------------------------------------------------
    def _child_indent(self, parent_indent, lineno):
        if self.pos >= len(self.lines) or self.lines[self.pos][0] <= parent_indent:
            raise ParseError("expected an indented block", lineno + 1, parent_indent + 1)
        return self.lines[self.pos][0]

    def parse_block(self, parent_indent, header_line):
        indent = self._child_indent(parent_indent, header_line)
        stmts = []
        while self.pos < len(self.lines) and self.lines[self.pos][0] == indent:
            stmts.extend(self.parse_stmt(indent))
        if self.pos < len(self.lines) and self.lines[self.pos][0] > indent:
            ln = self.lines[self.pos]
            raise ParseError("unexpected indentation", ln[2], ln[0] + 1)
        return tuple(stmts)

    def _suite(self, ts, indent, lineno):
        """Body after a ':' -- inline simple statement or indented block."""
        if not ts.done():
            if self.pattern and ts.at("_") and ts.peek(1) is None:
                self.pos += 1
                return (StmtHole(),)
            s = self.parse_simple(ts)
            self.pos += 1
            return (s,)
        self.pos += 1
        return self.parse_block(indent, lineno)

    def parse_stmt(self, indent):
        line = self.lines[self.pos]
        ts = self.stream(line)
        lineno = line[2]
        if ts.at("for"):
            ts.next()
            it = ts.name()
            ts.expect("in")
            par = False
            if self.pattern and ts.at("_"):
                ts.next()
                lo, hi = Hole(), Hole()
            else:
                kw = ts.next()
                if kw.val not in ("seq", "par"):
                    raise ParseError("expected seq(...) or par(...)", kw.line, kw.col)
                par = kw.val == "par"
                ts.expect("(")
                lo = parse_expr_tokens(ts)
                ts.expect(",")
                hi = parse_expr_tokens(ts)
                ts.expect(")")
            ts.expect(":")
            body = self._suite(ts, indent, lineno)
            return [For(it, lo, hi, body, par)]
        if ts.at("if"):
            ts.next()
            cond = parse_expr_tokens(ts)
            ts.expect(":")
            body = self._suite(ts, indent, lineno)
            orelse = ()
            if self.pos < len(self.lines) and self.lines[self.pos][0] == indent:
                ets = self.stream(self.lines[self.pos])
                if ets.at("else"):
                    ets.next()
                    ets.expect(":")
                    orelse = self._suite(ets, indent, self.lines[self.pos][2])
            return [If(cond, body, orelse)]
        if ts.at("else"):
            ts.error("'else' without matching 'if'")
        s = self.parse_simple(ts)
        self.pos += 1
        return [s]

    def parse_simple(self, ts):
        if ts.at("pass"):
            ts.next()
            self._end(ts)
            return Pass()
        if self.pattern and ts.at("_") and ts.peek(1) is None:
            ts.next()
            return StmtHole()
        t = ts.next()
        if t.kind != "name" or t.val in KEYWORDS:
            raise ParseError(f"unexpected token {t.val!r}", t.line, t.col)
        name = t.val
        if ts.at(":"):
            ts.next()
            if self.pattern and ts.at("_"):
                ts.next()
                self._end(ts)
                return Alloc(name, "_", (Hole(),), "_")
            typ, dims = self.parse_type(ts)
            if typ in INDEX_TYPES:
                raise ParseError("cannot allocate a size/index variable", t.line, t.col)
            mem = DEFAULT_MEM
            if ts.at("@"):
                ts.next()
                mem = ts.name()
            self._end(ts)
            return Alloc(name, typ, dims, mem)
        if ts.at("("):
            ts.next()
            args = []
            if not ts.at(")"):
                while True:
                    args.append(parse_expr_tokens(ts))
                    if ts.at(","):
                        ts.next()
                        continue
                    break
            ts.expect(")")
            self._end(ts)
            callee = self.procs.get(name)
            if callee is None:
                if self.pattern:
                    callee = Procedure(name, (), (), (Pass(),))
                else:
                    raise WellFormednessError([f"line {t.line}: call to unknown procedure '{name}'"])
            return Call(callee, tuple(args))
        idx = ()
        if ts.at("["):
            idx, window = _index_list(ts)
            if window:
                ts.error("slices are not allowed on the left of an assignment")
        op = ts.next()
        if op.val not in ("=", "+="):
            raise ParseError(f"expected '=' or '+=', got {op.val!r}", op.line, op.col)
        rhs = parse_expr_tokens(ts)
        self._end(ts)
        return (Assign if op.val == "=" else Reduce)(name, idx, rhs)

    def _end(self, ts):
        if not ts.done():
            ts.error(f"unexpected {ts.peek().val!r}")


def parse_procs(text, procs=None, check=True):
    """Parse every procedure in `text`; returns them in file order."""
    out = _Parser(text, procs).parse_file()
    if not out:
        raise ParseError("no procedure found", 1, 1)
    if check:
        from .wellformed import check_wellformed

        for p in out:
            diags = check_wellformed(p)
            if diags:
                raise WellFormednessError(diags)
    return out


def parse_proc(text, procs=None, check=True):
    """Parse `text` and return its last procedure (earlier ones are callees)."""
    return parse_procs(text, procs, check)[-1]


def parse_file(path, procs=None):
    with open(path, encoding="utf-8") as f:
        return {p.name: p for p in parse_procs(f.read(), procs)}


def parse_expr(text, pattern=False):
    lines = logical_lines(text)
    if len(lines) != 1:
        raise ParseError("expected a single expression", 1, 1)
    ts = _TokStream(lines[0][1], lines[0][2], pattern)
    e = parse_expr_tokens(ts)
    if not ts.done():
        ts.error(f"unexpected {ts.peek().val!r}")
    return e


SELECTOR_RE = re.compile(r"^(.*?)\s*#\s*(\d+)\s*$", re.S)


def split_selector(text):
    m = SELECTOR_RE.match(text)
    if m and not text.lstrip().startswith("#"):
        return m.group(1), int(m.group(2))
    return text, None


def parse_pattern(text, procs=None):
    """Parse a statement or expression pattern; returns (node, selector)."""
    body, sel = split_selector(text)
    body = body.strip()
    # a statement pattern if it parses as one, else an expression
    try:
        p = _Parser(body, procs, pattern=True)
        if len(p.lines) >= 1:
            stmts = []
            while p.pos < len(p.lines):
                stmts.extend(p.parse_stmt(p.lines[p.pos][0]))
            if len(stmts) == 1 and not _looks_like_expr(body):
                return stmts[0], sel
            if len(stmts) > 1:
                return tuple(stmts), sel
    except (ParseError, WellFormednessError):
        pass
    return parse_expr(body, pattern=True), sel


def _looks_like_expr(text):
    """A bare name or a name with indices is ambiguous; treat as expression."""
    return re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*(\s*\[.*\])?", text, re.S) is not None
