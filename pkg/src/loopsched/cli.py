"""Command-line front end: `exo2ir parse|print|schedule|equiv|emit|explain`.

Exit codes: 0 success, 1 usage or input error, 2 SchedulingError (or a
failed back-end check), 3 InvalidCursorError, 4 InternalError or any other
unexpected failure, 5 procedures not equivalent.
"""

import argparse
import os
import re
import shlex
import sys

from .codegen import emit_c
from .errors import (
    BackendError,
    InternalError,
    InvalidCursorError,
    LoopSchedError,
    ParseError,
    SchedulingError,
)
from .interp import check_equiv
from .parser import parse_file
from .primitives import CATALOG
from .printer import print_proc
from .stdlib import (
    fma_rule,
    general_tile2D,
    halide_compute_at,
    halide_store_at,
    hoist_stmt,
    interleave_loop,
    licm,
    cse,
    load_machine,
    optimize_level_1,
    tile2D,
    vectorize,
)

EXIT_OK, EXIT_USAGE, EXIT_SCHED, EXIT_CURSOR, EXIT_INTERNAL, EXIT_NOT_EQUIV = 0, 1, 2, 3, 4, 5

TAIL_WORDS = ("guard", "cut", "cut_and_guard", "cut_and_pred", "perfect")
IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
NAV_METHODS = ("parent", "next", "prev", "before", "after", "body", "as_block")


class UsageError(Exception):
    pass


def _stdlib_table(machine):
    """Script-callable library operations: name -> (fn, kinds, kw kinds)."""

    def need():
        if machine is None:
            raise UsageError("this command needs --machine")
        return machine

    def vec(p, loop, precision, tail="cut"):
        m = need()
        rules = [fma_rule] if m.has_fma else []
        return vectorize(p, loop, m.vec_width(precision), precision, m.mem_type, m.get_instructions(precision), rules, tail)

    def level1(p, loop, precision, interleave=1, tail=None):
        return optimize_level_1(p, loop, precision, need(), interleave, tail)

    return {
        "tile2D": (tile2D, ("cursor", "cursor", "names", "names", "int", "int"), {}),
        "general_tile2D": (general_tile2D, ("cursor", "cursor", "names", "names", "int", "int"), {}),
        "hoist_stmt": (hoist_stmt, ("cursor",), {}),
        "cse": (cse, ("cursor",), {"precision": "name"}),
        "licm": (licm, ("cursor",), {}),
        "interleave_loop": (interleave_loop, ("cursor", "int"), {"tail": "tail"}),
        "vectorize": (vec, ("cursor", "name"), {"tail": "tail"}),
        "optimize_level_1": (level1, ("cursor", "name"), {"interleave": "int", "tail": "tail"}),
        "halide_compute_at": (halide_compute_at, ("name", "name", "name"), {"store": "bool"}),
        "halide_store_at": (halide_store_at, ("name", "name", "name"), {}),
    }


# --------------------------------------------------------------------------
# schedule scripts


class Command:
    def __init__(self, lineno, name, tokens, bind=None):
        self.lineno = lineno
        self.name = name
        self.tokens = tokens
        self.bind = bind

    def __repr__(self):
        return f"Command({self.lineno}, {self.name!r}, {self.tokens!r})"


def read_script(text):
    """Split a schedule script into commands.

    One command per line: `NAME ARG... [key=value...]`, or
    `let X = find PATTERN`, `let X = find_loop NAME`, `let X = nav Y METHOD [K]`.
    `#` starts a comment."""
    cmds = []
    for lineno, line in enumerate(text.splitlines(), 1):
        try:
            toks = shlex.split(line, comments=True)
        except ValueError as e:
            raise UsageError(f"line {lineno}: {e}")
        if not toks:
            continue
        if toks[0] == "let":
            if len(toks) < 4 or toks[2] != "=" or not IDENT.match(toks[1]):
                raise UsageError(f"line {lineno}: expected 'let NAME = ...'")
            cmds.append(Command(lineno, toks[3], toks[4:], bind=toks[1]))
        else:
            cmds.append(Command(lineno, toks[0], toks[1:]))
    return cmds


def _split_list(tok):
    tok = tok.strip().strip("[]()")
    return [t.strip() for t in re.split(r"[,\s]+", tok) if t.strip()]


def _convert(kind, tok, env, procs):
    if kind == "cursor":
        return env.get(tok, tok)
    if kind == "cursors":
        return [env.get(t, t) for t in _split_list(tok)] if ("," in tok or tok not in env) else env[tok]
    if kind == "int":
        try:
            return int(tok)
        except ValueError:
            raise UsageError(f"expected an integer, got '{tok}'")
    if kind == "ints":
        try:
            return [int(t) for t in _split_list(tok)]
        except ValueError:
            raise UsageError(f"expected integers, got '{tok}'")
    if kind == "name":
        if not IDENT.match(tok):
            raise UsageError(f"expected a name, got '{tok}'")
        return tok
    if kind == "names":
        names = _split_list(tok)
        if not all(IDENT.match(n) for n in names):
            raise UsageError(f"expected names, got '{tok}'")
        return names
    if kind == "exprs":
        return [t for t in tok.split(",")] if "," in tok else [tok]
    if kind == "bool":
        if tok.lower() in ("true", "1", "yes"):
            return True
        if tok.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"expected true/false, got '{tok}'")
    if kind == "proc":
        if tok not in procs:
            raise UsageError(f"unknown procedure '{tok}'")
        return procs[tok]
    return tok  # expr, str, tail


def bind_args(cmd, kinds, kw_kinds, env, procs):
    """Turn the tokens of `cmd` into (args, kwargs) for its function."""
    toks = list(cmd.tokens)
    kwargs = {}
    pos = []
    for t in toks:
        key, eq, val = t.partition("=")
        if eq and IDENT.match(key) and key in kw_kinds:
            kwargs[key] = _convert(kw_kinds[key], val, env, procs)
        elif t in TAIL_WORDS and "tail" in kw_kinds and t != "perfect":
            kwargs["tail"] = t
        elif t == "perfect" and ("perfect" in kw_kinds or "tail" in kw_kinds):
            kwargs["perfect" if "perfect" in kw_kinds else "tail"] = True if "perfect" in kw_kinds else "perfect"
        else:
            pos.append(t)
    args = []
    for k, kind in enumerate(kinds):
        last = k == len(kinds) - 1
        if not pos:
            raise UsageError(f"line {cmd.lineno}: '{cmd.name}' expects {len(kinds)} arguments ({', '.join(kinds)})")
        if kind in ("names", "ints", "exprs", "cursors") and last and len(pos) > 1:
            tok, pos = ",".join(pos), []
        else:
            tok, pos = pos[0], pos[1:]
        args.append(_convert(kind, tok, env, procs))
    if pos:
        raise UsageError(f"line {cmd.lineno}: too many arguments for '{cmd.name}'")
    return args, kwargs


def _nav(p, env, cmd):
    if cmd.name == "find":
        if len(cmd.tokens) != 1:
            raise UsageError(f"line {cmd.lineno}: find takes one pattern")
        return p.find(cmd.tokens[0])
    if cmd.name == "find_loop":
        if len(cmd.tokens) != 1:
            raise UsageError(f"line {cmd.lineno}: find_loop takes one loop name")
        return p.find_loop(cmd.tokens[0])
    if cmd.name == "nav":
        if len(cmd.tokens) < 2 or cmd.tokens[0] not in env or cmd.tokens[1] not in NAV_METHODS:
            raise UsageError(f"line {cmd.lineno}: expected 'nav CURSOR {'|'.join(NAV_METHODS)} [K]'")
        c = env[cmd.tokens[0]].forward_to(p)
        out = getattr(c, cmd.tokens[1])()
        if len(cmd.tokens) > 2:
            out = out[int(cmd.tokens[2])]
        return out
    raise UsageError(f"line {cmd.lineno}: 'let' needs find, find_loop or nav, got '{cmd.name}'")


class ScriptFailure(Exception):
    def __init__(self, index, cmd, err):
        super().__init__(str(err))
        self.index = index
        self.cmd = cmd
        self.err = err


def run_script(p, cmds, procs, machine=None):
    """Apply the commands in order; wrap library errors in ScriptFailure."""
    table = dict(CATALOG)
    table.update(_stdlib_table(machine))
    env = {}
    for k, cmd in enumerate(cmds, 1):
        if cmd.bind is not None:
            try:
                env[cmd.bind] = _nav(p, env, cmd)
            except LoopSchedError as e:
                raise ScriptFailure(k, cmd, e)
            continue
        entry = table.get(cmd.name)
        if entry is None:
            raise UsageError(f"line {cmd.lineno}: unknown command '{cmd.name}'")
        fn, kinds, kw = entry
        args, kwargs = bind_args(cmd, kinds, kw, env, procs)
        try:
            out = fn(p, *args, **kwargs)
        except LoopSchedError as e:
            raise ScriptFailure(k, cmd, e)
        except UsageError:
            raise
        except Exception as e:  # a bug, not a user error
            raise ScriptFailure(k, cmd, InternalError(f"{type(e).__name__}: {e}"))
        p = out[0] if isinstance(out, tuple) else out
    return p


# --------------------------------------------------------------------------
# subcommands


def _load(path):
    try:
        return parse_file(path)
    except OSError as e:
        raise UsageError(str(e))


def _proc(procs, name):
    if name is None:
        if len(procs) != 1:
            raise UsageError(f"the file defines {len(procs)} procedures; name one")
        return next(iter(procs.values()))
    if name not in procs:
        raise UsageError(f"no procedure '{name}' (have: {', '.join(procs)})")
    return procs[name]


def _machine(args, procs):
    if not args.machine:
        return None
    m = load_machine(args.machine)
    for q in m.instrs.values():
        procs.setdefault(q.name, q)
    return m


def _write(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _script_text(path):
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise UsageError(str(e))


def cmd_parse(args):
    procs = _load(args.file)
    print(f"ok: {len(procs)} procedure(s): {', '.join(procs)}")
    return EXIT_OK


def cmd_print(args):
    procs = _load(args.file)
    chosen = [_proc(procs, args.proc)] if args.proc else list(procs.values())
    _write(args, "\n".join(print_proc(q) for q in chosen))
    return EXIT_OK


def cmd_schedule(args):
    procs = _load(args.file)
    m = _machine(args, procs)
    p = _proc(procs, args.proc)
    q = run_script(p, read_script(_script_text(args.script)), procs, m)
    _write(args, print_proc(q))
    return EXIT_OK


def cmd_equiv(args):
    procs = _load(args.file)
    a, b = _proc(procs, args.proc_a), _proc(procs, args.proc_b)
    res = check_equiv(a, b, trials=args.trials, seed=args.seed)
    print(res.summary())
    return EXIT_OK if res.equal else EXIT_NOT_EQUIV


def cmd_emit(args):
    procs = _load(args.file)
    m = _machine(args, procs)
    p = _proc(procs, args.proc)
    if args.script:
        p = run_script(p, read_script(_script_text(args.script)), procs, m)
    header, source = emit_c(p)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for ext, text in (("h", header), ("c", source)):
            with open(os.path.join(args.out, f"{p.name}.{ext}"), "w", encoding="utf-8") as f:
                f.write(text)
        print(f"wrote {p.name}.h and {p.name}.c to {args.out}")
    else:
        sys.stdout.write(header + "\n" + source)
    return EXIT_OK


def cmd_explain(args):
    procs = _load(args.file)
    m = _machine(args, procs)
    p = _proc(procs, args.proc)
    try:
        run_script(p, read_script(_script_text(args.script)), procs, m)
    except ScriptFailure as f:
        e = f.err
        print(f"command {f.index} (line {f.cmd.lineno}): {f.cmd.name} {' '.join(f.cmd.tokens)}")
        print(f"error: {type(e).__name__}: {e}")
        cond = getattr(e, "condition", None)
        if cond:
            print(f"failed condition: {cond}")
        text = getattr(e, "explanation", None)
        print(text if text else "(no proof trace recorded for this failure)")
        return _exit_for(e)
    print("the script ran without errors; nothing to explain")
    return EXIT_OK


def _exit_for(e):
    if isinstance(e, (SchedulingError, BackendError)):
        return EXIT_SCHED
    if isinstance(e, InvalidCursorError):
        return EXIT_CURSOR
    if isinstance(e, InternalError):
        return EXIT_INTERNAL
    if isinstance(e, (ParseError, UsageError)):
        return EXIT_USAGE
    return EXIT_INTERNAL


def _report(f):
    e = f.err
    cond = getattr(e, "condition", None)
    msg = f"{type(e).__name__} in command {f.index} ({f.cmd.name}, line {f.cmd.lineno}): {e}"
    if cond:
        msg += f"\n  failed condition: {cond}"
    print(msg, file=sys.stderr)


def build_parser():
    ap = argparse.ArgumentParser(prog="exo2ir", description="Schedule, check and emit loop programs.")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized trials (default 0)")
    ap.add_argument("--trials", type=int, default=20, help="random instances for equiv (default 20)")
    ap.add_argument("--machine", help="bundled machine name or machine JSON path")
    ap.add_argument("--out", help="output file (schedule/print) or directory (emit)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("parse", help="parse and check a file")
    s.add_argument("file")
    s.set_defaults(fn=cmd_parse)

    s = sub.add_parser("print", help="print procedures in canonical form")
    s.add_argument("file")
    s.add_argument("proc", nargs="?")
    s.set_defaults(fn=cmd_print)

    s = sub.add_parser("schedule", help="apply a schedule script")
    s.add_argument("file")
    s.add_argument("proc")
    s.add_argument("script")
    s.set_defaults(fn=cmd_schedule)

    s = sub.add_parser("equiv", help="compare two procedures on random instances")
    s.add_argument("file")
    s.add_argument("proc_a")
    s.add_argument("proc_b")
    s.set_defaults(fn=cmd_equiv)

    s = sub.add_parser("emit", help="emit C for a procedure")
    s.add_argument("file")
    s.add_argument("proc")
    s.add_argument("--script", help="schedule to apply first")
    s.set_defaults(fn=cmd_emit)

    s = sub.add_parser("explain", help="replay a script and explain the failed proof")
    s.add_argument("file")
    s.add_argument("proc")
    s.add_argument("script")
    s.set_defaults(fn=cmd_explain)
    return ap


def main(argv=None):
    ap = build_parser()
    # global flags may also follow the subcommand
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = ap.parse_args(_hoist_globals(argv))
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.fn(args)
    except ScriptFailure as f:
        _report(f)
        return _exit_for(f.err)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except LoopSchedError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return _exit_for(e)


def _hoist_globals(argv):
    front, rest = [], []
    i = 0
    while i < len(argv):
        a = argv[i]
        name = a.split("=", 1)[0]
        if name in ("--seed", "--trials", "--machine", "--out"):
            if "=" in a:
                front.append(a)
            elif i + 1 < len(argv):
                front += [a, argv[i + 1]]
                i += 1
            else:
                front.append(a)
        else:
            rest.append(a)
        i += 1
    return front + rest


if __name__ == "__main__":
    sys.exit(main())
