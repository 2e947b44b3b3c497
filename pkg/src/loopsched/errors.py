"""Exception hierarchy.

Scheduling code distinguishes three user-facing classes: `SchedulingError`
(a rewrite would not preserve equivalence), `InvalidCursorError` (a
reference cannot be resolved or navigated) and `InternalError` (a bug in
this library).  Everything else below is a refinement of one of those or a
front-end/runtime error that never reaches scheduling code.
"""


class LoopSchedError(Exception):
    """Root of every exception raised by this package."""


class SchedulingError(LoopSchedError):
    """A primitive's safety condition could not be established."""

    def __init__(self, msg, cursor=None, condition=None):
        super().__init__(msg)
        self.cursor = cursor
        self.condition = condition
        self.explanation = None


class InvalidCursorError(LoopSchedError):
    """Navigation left the tree, or a forwarded cursor was invalidated."""

    def __init__(self, msg, cursor=None):
        super().__init__(msg)
        self.cursor = cursor


class NotFoundError(InvalidCursorError):
    """A pattern matched nothing in its search scope."""


class ProvenanceError(InvalidCursorError):
    """A cursor's procedure is not an ancestor of the target procedure."""


class InternalError(LoopSchedError):
    """Something that should be impossible happened."""


class EditError(InternalError):
    """An atomic edit was given a malformed fragment or target."""


class ParseError(LoopSchedError):
    def __init__(self, msg, line=None, col=None):
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + msg)
        self.line = line
        self.col = col


class WellFormednessError(LoopSchedError):
    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


class RuntimeFault(LoopSchedError):
    """Out-of-bounds access, uninitialized read, division by zero, failed assert."""

    def __init__(self, msg, path=None, proc=None):
        loc = f" at {format_path(path)}" if path is not None else ""
        super().__init__(msg + loc)
        self.path = path
        self.proc = proc


class InstanceError(LoopSchedError):
    pass


class AnalysisError(LoopSchedError):
    pass


class BackendError(LoopSchedError):
    pass


def format_path(path):
    parts = []
    for label, idx in path:
        if idx is None:
            parts.append(f"({label},-)")
        elif isinstance(idx, tuple):
            parts.append(f"({label},{idx[0]}:{idx[1]})")
        else:
            parts.append(f"({label},{idx})")
    return "".join(parts) or "(root)"
