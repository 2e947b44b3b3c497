"""The scheduling primitives.

Every primitive has the shape ``prim(p, cursor_or_pattern, *args) -> p'``.
``CATALOG`` maps each public name to its function and argument kinds; the
CLI and ``apply_catalog`` dispatch through it.  Forwarding rules are listed
in FORWARDING.md next to this file.
"""

from ..errors import SchedulingError
from .buffers import (
    bind_expr,
    delete_buffer,
    divide_dim,
    expand_dim,
    lift_alloc,
    mult_dim,
    rearrange_dim,
    resize_dim,
    reuse_buffer,
    set_memory,
    set_precision,
    sink_alloc,
    stage_mem,
    unroll_buffer,
)
from .loops import (
    add_loop,
    cut_loop,
    divide_loop,
    divide_with_recompute,
    fission,
    fuse,
    join_loops,
    lift_scope,
    mult_loops,
    parallelize_loop,
    remove_loop,
    reorder_loops,
    shift_loop,
    unroll_loop,
)
from .stmts import (
    commute_expr,
    eliminate_dead_code,
    inline_assign,
    merge_writes,
    reorder_stmts,
    rewrite_expr,
    simplify,
    specialize,
)
from .subprocs import call_eqv, extract_subproc, inline, replace

# argument kinds, used by the schedule-script reader:
#   cursor  a cursor or pattern string    int    an integer
#   name    an identifier                 names  a list of identifiers
#   expr    expression text               ints   a list of integers
#   tail    a tail strategy keyword       bool   true/false
#   proc    a procedure name              exprs  a list of expression texts
#   cursors a list of cursors or patterns  str    free text
CATALOG = {
    # loops
    "divide_loop": (divide_loop, ("cursor", "int", "names"), {"tail": "tail", "perfect": "bool"}),
    "divide_with_recompute": (divide_with_recompute, ("cursor", "expr", "int", "names"), {}),
    "mult_loops": (mult_loops, ("cursor", "name"), {}),
    "cut_loop": (cut_loop, ("cursor", "expr"), {}),
    "join_loops": (join_loops, ("cursor", "cursor"), {}),
    "shift_loop": (shift_loop, ("cursor", "expr"), {}),
    "fission": (fission, ("cursor",), {"n_lifts": "int"}),
    "fuse": (fuse, ("cursor", "cursor"), {}),
    "reorder_loops": (reorder_loops, ("cursor",), {}),
    "lift_scope": (lift_scope, ("cursor",), {}),
    "remove_loop": (remove_loop, ("cursor",), {}),
    "add_loop": (add_loop, ("cursor", "name", "expr"), {"guard": "bool"}),
    "unroll_loop": (unroll_loop, ("cursor",), {}),
    "parallelize_loop": (parallelize_loop, ("cursor",), {}),
    # statements and expressions
    "reorder_stmts": (reorder_stmts, ("cursor",), {}),
    "commute_expr": (commute_expr, ("cursors",), {}),
    "specialize": (specialize, ("cursor", "exprs"), {}),
    "simplify": (simplify, (), {"scope": "cursor"}),
    "eliminate_dead_code": (eliminate_dead_code, ("cursor",), {}),
    "rewrite_expr": (rewrite_expr, ("cursor", "expr"), {}),
    "merge_writes": (merge_writes, ("cursor",), {}),
    "inline_assign": (inline_assign, ("cursor",), {}),
    # buffers
    "lift_alloc": (lift_alloc, ("cursor",), {"n_lifts": "int"}),
    "sink_alloc": (sink_alloc, ("cursor",), {}),
    "delete_buffer": (delete_buffer, ("cursor",), {}),
    "reuse_buffer": (reuse_buffer, ("cursor", "cursor"), {}),
    "resize_dim": (resize_dim, ("cursor", "int", "expr", "expr"), {"fold": "bool"}),
    "expand_dim": (expand_dim, ("cursor", "expr", "expr"), {}),
    "rearrange_dim": (rearrange_dim, ("cursor", "ints"), {}),
    "divide_dim": (divide_dim, ("cursor", "int", "int"), {}),
    "mult_dim": (mult_dim, ("cursor", "int", "int"), {}),
    "unroll_buffer": (unroll_buffer, ("cursor", "int"), {}),
    "bind_expr": (bind_expr, ("cursors", "name"), {"cse": "bool"}),
    "stage_mem": (stage_mem, ("cursor", "str", "name"), {"accum": "bool"}),
    "set_memory": (set_memory, ("cursor", "name"), {}),
    "set_precision": (set_precision, ("cursor", "name"), {}),
    # subprocedures
    "replace": (replace, ("cursor", "proc"), {}),
    "inline": (inline, ("cursor",), {}),
    "call_eqv": (call_eqv, ("cursor", "proc"), {}),
    "extract_subproc": (extract_subproc, ("cursor", "name"), {}),
}

ANNOTATIONS = {
    "set_memory": set_memory,
    "set_precision": set_precision,
    "parallelize_loop": parallelize_loop,
}


def annotate(p, target, attr, *args):
    """Apply one of the annotation primitives by name."""
    fn = ANNOTATIONS.get(attr)
    if fn is None:
        raise SchedulingError(f"annotate: unknown annotation '{attr}'")
    return fn(p, target, *args)


def apply_catalog(p, name, *args, **kwargs):
    """Look up a primitive by name and apply it."""
    entry = CATALOG.get(name)
    if entry is None:
        raise SchedulingError(f"unknown primitive '{name}'")
    return entry[0](p, *args, **kwargs)


__all__ = sorted(CATALOG) + ["CATALOG", "annotate", "apply_catalog"]
