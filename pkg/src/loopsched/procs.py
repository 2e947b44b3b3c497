"""Procedure-level utilities: partial evaluation, assertions, renaming."""

import re
from dataclasses import replace

from .edits import Editor
from .errors import SchedulingError, WellFormednessError
from .ir import Read, lit, subst, walk_paths


def _eval_closed(e):
    """Evaluate a predicate with no free names; None if it still has names."""
    from .interp import eval_pred_closed

    return eval_pred_closed(e)


def partial_eval(p, bindings=None, **kw):
    """Specialize size parameters to integer literals."""
    bindings = dict(bindings or {})
    bindings.update(kw)
    if not bindings:
        return p
    for name, v in bindings.items():
        try:
            a = p.arg(name)
        except KeyError:
            raise SchedulingError(f"partial_eval: '{p.name}' has no parameter '{name}'") from None
        if not a.is_size:
            raise SchedulingError(f"partial_eval: parameter '{name}' is not a size")
        if int(v) != v or v < 0:
            raise SchedulingError(f"partial_eval: '{name}' must be a non-negative integer, got {v}")
    mapping = {n: lit(int(v)) for n, v in bindings.items()}

    preds = []
    for pred in p.preds:
        pe = subst(pred, mapping)
        val = _eval_closed(pe)
        if val is False:
            from .printer import print_expr

            raise SchedulingError(
                f"partial_eval: binding violates 'assert {print_expr(pred)}'",
                condition=print_expr(pred),
            )
        if val is None:
            preds.append(pe)

    args = []
    for a in p.args:
        if a.name in mapping:
            continue
        args.append(replace(a, dims=tuple(subst(d, mapping) for d in a.dims)))

    # replace each read of a bound name in place, so other cursors survive
    ed = Editor(p)
    targets = [
        path
        for path, n in walk_paths(p)
        if isinstance(n, Read) and not n.idx and n.name in mapping
    ]
    for path in targets:
        ed.replace(path, mapping[get_name(p, path)])
    return ed.finish(label="partial_eval", args=tuple(args), preds=tuple(preds))


def get_name(p, path):
    from .ir import get_at

    return get_at(p, path).name


def add_assertion(p, pred):
    if isinstance(pred, str):
        from .parser import parse_expr

        pred = parse_expr(pred)
    sizes = {a.name for a in p.args if a.is_size}
    from .ir import expr_names

    bad = sorted(expr_names(pred) - sizes)
    if bad:
        raise WellFormednessError([f"assertion may only reference size parameters, found {', '.join(bad)}"])
    ed = Editor(p)
    return ed.finish(label="add_assertion", preds=p.preds + (pred,))


IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")


def rename(p, name):
    if not IDENT_RE.match(name):
        raise WellFormednessError([f"'{name}' is not a valid identifier"])
    return Editor(p).finish(label="rename", name=name)
