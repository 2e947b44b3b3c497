"""Scheduling library built only from public primitives, cursors and
analysis queries."""

from .combinators import (
    RECOVERABLE,
    fission_after,
    hoist,
    hoist_stmt,
    identity,
    innermost,
    lift,
    loops,
    lrn,
    nav,
    preorder,
    reduce_over,
    reframe,
    remove_parent_loop,
    reorder_before,
    repeat_op,
    savec,
    seq_ops,
    try_else,
)
from .halide import consumer_loop, halide_compute_at, halide_store_at
from .machine import MachineDescription, bundled_machines, load_machine
from .opt import cse, licm
from .tiling import general_tile2D, tile2D, tileND
from .vectorize import (
    DESCEND,
    SKIP,
    STAGE,
    fission_into_singles,
    fma_rule,
    interleave_loop,
    optimize_level_1,
    parallelize_reductions,
    replace_all_stmts,
    stage_compute,
    vectorize,
)

# schedule-script names for operations that take (p, args...)
SCHEDULES = {
    "tile2D": tile2D,
    "tileND": tileND,
    "general_tile2D": general_tile2D,
    "hoist_stmt": hoist_stmt,
    "cse": cse,
    "licm": licm,
    "vectorize": vectorize,
    "interleave_loop": interleave_loop,
    "optimize_level_1": optimize_level_1,
    "halide_compute_at": halide_compute_at,
    "halide_store_at": halide_store_at,
}
