"""Tiling schedules written as ordinary user functions."""

from ..errors import InvalidCursorError, SchedulingError
from ..primitives import divide_loop, lift_scope


def tile2D(p, i_lp, j_lp, i_itrs, j_itrs, i_sz, j_sz):
    p = divide_loop(p, i_lp, i_sz, i_itrs, perfect=True)
    p = divide_loop(p, j_lp, j_sz, j_itrs, perfect=True)
    p = lift_scope(p, j_itrs[0])
    return p


def tileND(p, loops, new_iters, tile_sizes):
    for i, loop in enumerate(loops):
        p = divide_loop(p, loop, tile_sizes[i], new_iters[i], perfect=True)
    for i, _ in enumerate(loops):
        for _j in range(0, i):
            p = lift_scope(p, new_iters[i][0])
    return p


def general_tile2D(p, i_lp, j_lp, i_itrs, j_itrs, i_sz, j_sz):
    """Perfect tiling when it is provably safe, guarded tiles otherwise."""
    orig_p = p
    try:
        return tile2D(p, i_lp, j_lp, i_itrs, j_itrs, i_sz, j_sz)
    except (SchedulingError, InvalidCursorError):
        pass
    p = divide_loop(orig_p, i_lp, i_sz, i_itrs, tail="guard")
    p = divide_loop(p, j_lp, j_sz, j_itrs, tail="guard")
    # one lift past the i guard, one past the inner i loop
    p = lift_scope(p, j_itrs[0])
    p = lift_scope(p, j_itrs[0])
    return p
