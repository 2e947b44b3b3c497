"""Conservative affine reasoning.

Index expressions normalize to `AffineForm`s over integer variables.  A
floor division `e / c` becomes an opaque integer atom `d` constrained by
c*d <= e <= c*d + c - 1, and `e % c` is rewritten as `e - c*(e / c)`, so
divisibility needs no special treatment.

`prove(facts, pred)` negates `pred` into disjunctive normal form and shows
every disjunct infeasible together with the facts: equalities with a unit
coefficient are substituted away, then Fourier-Motzkin elimination runs
with gcd tightening after each step.  When elimination cannot refute a
system whose variables all have small proven ranges, the box is
enumerated instead.  The answer is "valid" or "unknown", never "invalid":
callers treat unknown as failure.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from .errors import AnalysisError
from .ir import (
    Alloc,
    Assign,
    BinOp,
    Call,
    Const,
    For,
    If,
    Interval,
    Read,
    Reduce,
    USub,
    WindowExpr,
    get_at,
    lit,
    walk_stmts,
)

VALID = "valid"
UNKNOWN = "unknown"

MAX_CONSTRAINTS = 600
MAX_DISJUNCTS = 64
MAX_BOX = 4096


# --------------------------------------------------------------------------
# affine forms


def _vkey(v):
    return (0, v) if isinstance(v, str) else (1, v.key)


class AffineForm:
    """const + sum(coeff * var); vars are names or DivAtoms."""

    __slots__ = ("const", "coeffs", "_hash")

    def __init__(self, coeffs=None, const=0):
        items = []
        if coeffs:
            for v, c in (coeffs.items() if isinstance(coeffs, dict) else coeffs):
                c = Fraction(c)
                if c != 0:
                    items.append((v, c))
        items.sort(key=lambda t: _vkey(t[0]))
        self.coeffs = tuple(items)
        self.const = Fraction(const)
        self._hash = None

    @classmethod
    def var(cls, v):
        return cls({v: 1})

    @classmethod
    def constant(cls, c):
        return cls(None, c)

    def as_dict(self):
        return dict(self.coeffs)

    def coeff(self, v):
        for w, c in self.coeffs:
            if w == v:
                return c
        return Fraction(0)

    def vars(self):
        return [v for v, _ in self.coeffs]

    def names(self):
        """Every plain variable name, including those inside atoms."""
        out = set()
        for v, _ in self.coeffs:
            if isinstance(v, str):
                out.add(v)
            else:
                out |= v.inner.names()
        return out

    def atoms(self):
        out = []
        for v, _ in self.coeffs:
            if isinstance(v, DivAtom):
                out.extend(v.inner.atoms())
                out.append(v)
        return out

    def is_const(self):
        return not self.coeffs

    def is_integral(self):
        return self.const.denominator == 1 and all(c.denominator == 1 for _, c in self.coeffs)

    def __add__(self, other):
        if not isinstance(other, AffineForm):
            other = AffineForm.constant(other)
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return AffineForm(d, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        if not isinstance(other, AffineForm):
            other = AffineForm.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, k):
        k = Fraction(k)
        return AffineForm({v: c * k for v, c in self.coeffs}, self.const * k)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.is_const() and self.const == other
        return isinstance(other, AffineForm) and self.coeffs == other.coeffs and self.const == other.const

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.coeffs, self.const))
        return self._hash

    def subst(self, mapping):
        """Replace variables (names or atoms) by forms."""
        out = AffineForm.constant(self.const)
        for v, c in self.coeffs:
            if v in mapping:
                out = out + mapping[v].scale(c)
            elif isinstance(v, DivAtom):
                inner = v.inner.subst(mapping)
                out = out + floor_div(inner, v.c).scale(c)
            else:
                out = out + AffineForm({v: c})
        return out

    def evaluate(self, env):
        total = self.const
        for v, c in self.coeffs:
            if isinstance(v, DivAtom):
                total += c * (v.inner.evaluate(env) // v.c)
            else:
                total += c * env[v]
        return total

    def __repr__(self):
        return f"AffineForm({self})"

    def __str__(self):
        parts = []
        for v, c in self.coeffs:
            name = v if isinstance(v, str) else str(v)
            if c == 1:
                parts.append(name)
            elif c == -1:
                parts.append(f"-{name}")
            else:
                parts.append(f"{_fmt(c)}*{name}")
        if self.const != 0 or not parts:
            parts.append(_fmt(self.const))
        s = " + ".join(parts)
        return s.replace("+ -", "- ")

    def to_expr(self, order=None):
        """Rebuild an index Expr; `order` lists names in preferred order."""
        rank = {n: k for k, n in enumerate(order or ())}
        terms = sorted(self.coeffs, key=lambda t: (rank.get(t[0], len(rank)) if isinstance(t[0], str) else len(rank) + 1, _vkey(t[0])))
        e = None
        for v, c in terms:
            base = Read(v) if isinstance(v, str) else BinOp("/", v.inner.to_expr(order), lit(v.c))
            if c.denominator != 1:
                raise AnalysisError("non-integral coefficient in index expression")
            c = int(c)
            mag = abs(c)
            term = base if mag == 1 else BinOp("*", lit(mag), base)
            if e is None:
                e = term if c > 0 else USub(term) if mag == 1 else BinOp("*", lit(c), base)
            else:
                e = BinOp("+" if c > 0 else "-", e, term)
        k = self.const
        if k.denominator != 1:
            raise AnalysisError("non-integral constant in index expression")
        k = int(k)
        if e is None:
            return lit(k)
        if k > 0:
            e = BinOp("+", e, lit(k))
        elif k < 0:
            e = BinOp("-", e, lit(-k))
        return e


def _fmt(c):
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


@dataclass(frozen=True)
class DivAtom:
    """floor(inner / c) for a positive integer c."""

    inner: AffineForm
    c: int

    @property
    def key(self):
        return f"({self.inner})/{self.c}"

    def __str__(self):
        return f"floor(({self.inner})/{self.c})"


def floor_div(form, c):
    c = int(c)
    if c <= 0:
        raise AnalysisError("division by a non-positive constant")
    if c == 1:
        return form
    if not form.is_integral():
        raise AnalysisError("floor division of a non-integral form")
    whole, rest = {}, {}
    for v, k in form.coeffs:
        if k % c == 0:
            whole[v] = k / c
        else:
            rest[v] = k
    k = int(form.const)
    out = AffineForm(whole, k // c)
    if rest:
        out = out + AffineForm.var(DivAtom(AffineForm(rest, k % c), c))
    return out


def mod_form(form, c):
    return form - floor_div(form, c).scale(c)


class NonAffine(Exception):
    pass


def normalize(e, env=None):
    """AffineForm for an index expression, or None if it is not affine.

    `env` optionally maps names to AffineForms (substitution)."""
    try:
        return _norm(e, env or {})
    except (NonAffine, AnalysisError):
        return None


def _norm(e, env):
    if isinstance(e, Const):
        return AffineForm.constant(e.val)
    if isinstance(e, Read):
        if e.idx:
            raise NonAffine(e)
        if e.name in env:
            return env[e.name]
        return AffineForm.var(e.name)
    if isinstance(e, USub):
        return -_norm(e.arg, env)
    if isinstance(e, BinOp):
        if e.op == "+":
            return _norm(e.lhs, env) + _norm(e.rhs, env)
        if e.op == "-":
            return _norm(e.lhs, env) - _norm(e.rhs, env)
        if e.op == "*":
            a, b = _norm(e.lhs, env), _norm(e.rhs, env)
            if a.is_const():
                return b.scale(a.const)
            if b.is_const():
                return a.scale(b.const)
            raise NonAffine(e)
        if e.op in ("/", "%"):
            a, b = _norm(e.lhs, env), _norm(e.rhs, env)
            if not b.is_const() or b.const.denominator != 1 or b.const <= 0:
                raise NonAffine(e)
            if not a.is_integral():
                raise NonAffine(e)
            return floor_div(a, b.const) if e.op == "/" else mod_form(a, b.const)
    raise NonAffine(e)


# --------------------------------------------------------------------------
# linear constraints


class Lin:
    """sum(coeffs) + const  (>= 0 | == 0), integer coefficients."""

    __slots__ = ("coeffs", "const", "eq")

    def __init__(self, coeffs, const, eq=False):
        self.coeffs = coeffs  # tuple of (var, int), sorted
        self.const = const
        self.eq = eq

    @classmethod
    def from_form(cls, form, eq=False):
        den = 1
        for _, c in form.coeffs:
            den = den * c.denominator // gcd(den, c.denominator)
        den = den * form.const.denominator // gcd(den, form.const.denominator)
        coeffs = tuple((v, int(c * den)) for v, c in form.coeffs)
        return cls(coeffs, int(form.const * den), eq)

    def key(self):
        return (tuple((_vkey(v), c) for v, c in self.coeffs), self.const, self.eq)

    def __str__(self):
        f = AffineForm(dict(self.coeffs), self.const)
        return f"{f} {'==' if self.eq else '>='} 0"

    def __repr__(self):
        return f"Lin({self})"

    def atoms(self):
        out = []
        for v, _ in self.coeffs:
            if isinstance(v, DivAtom):
                out.extend(v.inner.atoms())
                out.append(v)
        return out


def _atom_facts(atom):
    # c*d <= inner <= c*d + c - 1
    d = AffineForm.var(atom)
    lo = atom.inner - d.scale(atom.c)
    hi = d.scale(atom.c) + (atom.c - 1) - atom.inner
    return [Lin.from_form(lo), Lin.from_form(hi)]


def _close_atoms(cons):
    seen = set()
    out = list(cons)
    stack = [a for c in cons for a in c.atoms()]
    while stack:
        a = stack.pop()
        if a in seen:
            continue
        seen.add(a)
        for f in _atom_facts(a):
            out.append(f)
            stack.extend(f.atoms())
    return out


class FactSet:
    """An immutable conjunction of linear facts."""

    def __init__(self, cons=(), notes=()):
        self.cons = tuple(cons)
        self.notes = tuple(notes)

    def __iter__(self):
        return iter(self.cons)

    def __len__(self):
        return len(self.cons)

    def with_cons(self, cons, note=None):
        return FactSet(self.cons + tuple(cons), self.notes + ((note,) if note else ()))

    def add_pred(self, pred, positive=True):
        """Add a predicate if it is a conjunction of affine comparisons
        (anything else is dropped, which is always sound)."""
        from .printer import print_expr

        dnf = _dnf(pred, positive)
        if dnf is None or len(dnf) != 1:
            return self
        return self.with_cons(dnf[0], ("" if positive else "not ") + print_expr(pred))

    def add_range(self, it, lo, hi):
        a, b = normalize(lo), normalize(hi)
        x = AffineForm.var(it)
        cons = []
        if a is not None:
            cons.append(Lin.from_form(x - a))
        if b is not None:
            cons.append(Lin.from_form(b - x - 1))
        from .printer import print_expr

        return self.with_cons(cons, f"{print_expr(lo)} <= {it} < {print_expr(hi)}")

    def add_nonneg(self, name):
        return self.with_cons([Lin.from_form(AffineForm.var(name))], f"{name} >= 0")

    def rename(self, mapping):
        """Rename plain variables (str -> str)."""
        fm = {k: AffineForm.var(v) for k, v in mapping.items()}
        out = []
        for c in self.cons:
            f = AffineForm(dict(c.coeffs), c.const).subst(fm)
            out.append(Lin.from_form(f, c.eq))
        return FactSet(out, self.notes)

    def describe(self):
        lines = [f"  {n}" for n in self.notes if n]
        return "\n".join(lines) if lines else "  (no facts)"


def proc_facts(p):
    fs = FactSet()
    for a in p.args:
        if a.typ == "size":
            fs = fs.add_nonneg(a.name)
    for pred in p.preds:
        fs = fs.add_pred(pred)
    return fs


def facts_at(p, path):
    """Facts holding at the node `path` of procedure `p`: asserts, size
    non-negativity, enclosing loop ranges and enclosing branch conditions."""
    fs = proc_facts(p)
    node = p
    for d, (lab, idx) in enumerate(path):
        if isinstance(node, For) and lab == "body":
            fs = fs.add_range(node.iter, node.lo, node.hi)
        elif isinstance(node, If) and lab in ("body", "orelse"):
            fs = fs.add_pred(node.cond, positive=(lab == "body"))
        node = get_at(node, ((lab, idx),))
    return fs


# --------------------------------------------------------------------------
# predicates to DNF over linear constraints

_NEG = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def _cmp_cons(op, a, b):
    """List of disjuncts (each a list of Lin) for `a op b`."""
    d = a - b
    if op == "<":
        return [[Lin.from_form(-d - 1)]]
    if op == "<=":
        return [[Lin.from_form(-d)]]
    if op == ">":
        return [[Lin.from_form(d - 1)]]
    if op == ">=":
        return [[Lin.from_form(d)]]
    if op == "==":
        return [[Lin.from_form(d, eq=True)]]
    if op == "!=":
        return [[Lin.from_form(d - 1)], [Lin.from_form(-d - 1)]]
    raise NonAffine(op)


def _dnf(pred, positive=True):
    try:
        return _dnf_rec(pred, positive)
    except (NonAffine, AnalysisError):
        return None


def _dnf_rec(pred, positive):
    if isinstance(pred, BinOp) and pred.op in ("and", "or"):
        l, r = _dnf_rec(pred.lhs, positive), _dnf_rec(pred.rhs, positive)
        conj = (pred.op == "and") == positive
        if conj:
            out = [a + b for a in l for b in r]
            if len(out) > MAX_DISJUNCTS:
                raise NonAffine("too many disjuncts")
            return out
        return l + r
    if isinstance(pred, BinOp) and pred.op in _NEG:
        op = pred.op if positive else _NEG[pred.op]
        a, b = _norm(pred.lhs, {}), _norm(pred.rhs, {})
        return _cmp_cons(op, a, b)
    if isinstance(pred, Const):
        return [[]] if bool(pred.val) == positive else []
    raise NonAffine(pred)


# --------------------------------------------------------------------------
# Fourier-Motzkin


def _tighten(coeffs, const):
    g = 0
    for _, c in coeffs:
        g = gcd(g, c)
    if g > 1:
        coeffs = tuple((v, c // g) for v, c in coeffs)
        const = const // g  # floor: sound for integer points
    return coeffs, const


def _lin_add(a, b, ka, kb):
    d = {}
    for v, c in a[0]:
        d[v] = d.get(v, 0) + ka * c
    for v, c in b[0]:
        d[v] = d.get(v, 0) + kb * c
    coeffs = tuple(sorted(((v, c) for v, c in d.items() if c != 0), key=lambda t: _vkey(t[0])))
    return coeffs, ka * a[1] + kb * b[1]


class _Infeasible(Exception):
    pass


class _GiveUp(Exception):
    pass


def _subst_eq(cons, v, sol):
    """Substitute v := sol (coeffs, const; rational via denominator) into cons."""
    scoeffs, sconst, den = sol
    out = []
    for coeffs, const in cons:
        k = 0
        rest = []
        for w, c in coeffs:
            if w == v:
                k = c
            else:
                rest.append((w, c))
        if k == 0:
            out.append((coeffs, const))
            continue
        # den*(rest + const) + k*(scoeffs + sconst)
        d = {}
        for w, c in rest:
            d[w] = d.get(w, 0) + den * c
        for w, c in scoeffs:
            d[w] = d.get(w, 0) + k * c
        nc = tuple(sorted(((w, c) for w, c in d.items() if c != 0), key=lambda t: _vkey(t[0])))
        out.append((nc, den * const + k * sconst))
    return out


def _normalize_system(ineqs):
    """Tighten, dedupe, detect trivial contradictions."""
    best = {}
    for coeffs, const in ineqs:
        if not coeffs:
            if const < 0:
                raise _Infeasible(f"0 >= {-const} is false")
            continue
        coeffs, const = _tighten(coeffs, const)
        old = best.get(coeffs)
        if old is None or const < old:
            best[coeffs] = const
    for coeffs, const in best.items():
        neg = tuple((v, -c) for v, c in coeffs)
        if neg in best and const + best[neg] < 0:
            raise _Infeasible(f"opposite bounds on {AffineForm(dict(coeffs))}")
    return list(best.items())


def fm_infeasible(cons, trace=None):
    """True if the conjunction is proven to have no integer solution."""
    key = tuple(sorted(c.key() for c in cons)) if trace is None else None
    if key is not None and key in _FM_CACHE:
        return _FM_CACHE[key]
    res = _fm(cons, trace)
    if key is not None:
        if len(_FM_CACHE) > 20000:
            _FM_CACHE.clear()
        _FM_CACHE[key] = res
    return res


_FM_CACHE = {}


def _log(trace, msg):
    if trace is not None:
        trace.append(msg)


def _fm(cons, trace):
    cons = _close_atoms(cons)
    eqs = [(c.coeffs, c.const) for c in cons if c.eq]
    ineqs = [(c.coeffs, c.const) for c in cons if not c.eq]
    try:
        # equalities
        while eqs:
            coeffs, const = eqs.pop()
            if not coeffs:
                if const != 0:
                    raise _Infeasible(f"0 == {const} is false")
                continue
            g = 0
            for _, c in coeffs:
                g = gcd(g, c)
            if const % g != 0:
                raise _Infeasible(f"{AffineForm(dict(coeffs), const)} == 0 has no integer solution")
            unit = [(v, c) for v, c in coeffs if abs(c) == 1]
            if unit:
                v, c = unit[0]
                # v = -(rest + const)/c
                rest = tuple((w, -k * c) for w, k in coeffs if w != v)
                sol = (rest, -const * c, 1)
                _log(trace, f"substitute {_vname(v)} from {AffineForm(dict(coeffs), const)} == 0")
                eqs = _subst_eq(eqs, v, sol)
                ineqs = _subst_eq(ineqs, v, sol)
            else:
                ineqs.append((coeffs, const))
                ineqs.append((tuple((v, -c) for v, c in coeffs), -const))
        ineqs = _normalize_system(ineqs)
        while True:
            vars_ = {}
            for coeffs, _ in ineqs:
                for v, c in coeffs:
                    pos, neg = vars_.get(v, (0, 0))
                    vars_[v] = (pos + (c > 0), neg + (c < 0))
            if not vars_:
                break
            v = min(vars_, key=lambda w: (vars_[w][0] * vars_[w][1], _vkey(w)))
            P, N, R = [], [], []
            for coeffs, const in ineqs:
                c = dict(coeffs).get(v, 0)
                (P if c > 0 else N if c < 0 else R).append((coeffs, const))
            new = list(R)
            for p in P:
                a = dict(p[0])[v]
                for n in N:
                    b = -dict(n[0])[v]
                    new.append(_lin_add(p, n, b, a))
            _log(trace, f"eliminate {_vname(v)}: {len(P)} lower x {len(N)} upper -> {len(new)} constraints")
            if len(new) > MAX_CONSTRAINTS:
                raise _GiveUp()
            ineqs = _normalize_system(new)
        _log(trace, "elimination left a satisfiable system")
        return False
    except _Infeasible as e:
        _log(trace, f"contradiction: {e}")
        return True
    except _GiveUp:
        _log(trace, "too many constraints; giving up")
        return False


def _vname(v):
    return v if isinstance(v, str) else str(v)


def _base_vars(cons):
    out = set()
    for c in cons:
        for v, _ in c.coeffs:
            if isinstance(v, str):
                out.add(v)
            else:
                out |= v.inner.names()
    return sorted(out)


def var_bounds(cons, v):
    """Constant integer bounds (lo, hi) on `v` implied by cons (None = open)."""
    cons = _close_atoms(cons)
    eqs = [(c.coeffs, c.const) for c in cons if c.eq]
    ineqs = [(c.coeffs, c.const) for c in cons if not c.eq]
    for coeffs, const in eqs:
        ineqs.append((coeffs, const))
        ineqs.append((tuple((w, -c) for w, c in coeffs), -const))
    try:
        ineqs = _normalize_system(ineqs)
        while True:
            others = {w for coeffs, _ in ineqs for w, _ in coeffs if w != v}
            if not others:
                break
            cnt = {}
            for coeffs, _ in ineqs:
                for w, c in coeffs:
                    if w != v:
                        p, n = cnt.get(w, (0, 0))
                        cnt[w] = (p + (c > 0), n + (c < 0))
            w = min(cnt, key=lambda x: (cnt[x][0] * cnt[x][1], _vkey(x)))
            P, N, R = [], [], []
            for coeffs, const in ineqs:
                c = dict(coeffs).get(w, 0)
                (P if c > 0 else N if c < 0 else R).append((coeffs, const))
            new = list(R)
            for p in P:
                a = dict(p[0])[w]
                for n in N:
                    b = -dict(n[0])[w]
                    new.append(_lin_add(p, n, b, a))
            if len(new) > MAX_CONSTRAINTS:
                return None, None
            ineqs = _normalize_system(new)
    except _Infeasible:
        return 0, -1
    lo = hi = None
    for coeffs, const in ineqs:
        if len(coeffs) != 1:
            continue
        (_, c), = coeffs
        # c*v + const >= 0
        if c > 0:
            b = _ceil_div(-const, c)
            lo = b if lo is None else max(lo, b)
        else:
            b = const // (-c)
            hi = b if hi is None else min(hi, b)
    return lo, hi


def _ceil_div(a, b):
    return -((-a) // b)


def _enumerate_infeasible(cons, trace=None):
    """Exhaustively check a small box; True if no integer point satisfies cons."""
    names = _base_vars(cons)
    if not names:
        return None
    boxes = []
    size = 1
    for n in names:
        lo, hi = var_bounds(cons, n)
        if lo is None or hi is None:
            return None
        if hi < lo:
            return True
        size *= hi - lo + 1
        if size > MAX_BOX:
            return None
        boxes.append(range(lo, hi + 1))
    forms = [(AffineForm(dict(c.coeffs), c.const), c.eq) for c in cons]
    for point in itertools.product(*boxes):
        env = dict(zip(names, point))
        if all((f.evaluate(env) == 0) if eq else (f.evaluate(env) >= 0) for f, eq in forms):
            _log(trace, f"enumeration found a witness {env}")
            return False
    _log(trace, f"enumerated {size} points, none satisfy the system")
    return True


def infeasible(cons, trace=None):
    cons = list(cons)
    if fm_infeasible(cons, trace):
        return True
    r = _enumerate_infeasible(cons, trace)
    return bool(r)


def prove(facts, pred, trace=None):
    """VALID if `pred` holds at every integer point satisfying `facts`."""
    if isinstance(pred, str):
        from .parser import parse_expr

        pred = parse_expr(pred)
    neg = _dnf(pred, positive=False)
    if trace is not None:
        from .printer import print_expr

        trace.append("facts:")
        trace.append(facts.describe())
        trace.append(f"goal: {print_expr(pred)}")
    if neg is None:
        _log(trace, "goal is not affine")
        return UNKNOWN
    for k, disj in enumerate(neg):
        if trace is not None:
            trace.append(f"refute case {k + 1}/{len(neg)}: " + " and ".join(str(c) for c in disj))
        if not infeasible(list(facts.cons) + disj, trace):
            _log(trace, "could not refute this case")
            return UNKNOWN
    _log(trace, "valid")
    return VALID


def proves(facts, pred):
    return prove(facts, pred) == VALID


def is_feasible_unknown(facts, extra):
    return not infeasible(list(facts.cons) + list(extra))


def explain(facts, pred):
    trace = []
    res = prove(facts, pred, trace)
    return res, "\n".join(trace)


def form_bounds(facts, form):
    """Constant (lo, hi) bounds on `form` under facts (None when open)."""
    t = "__t"
    cons = list(facts.cons) + [Lin.from_form(form - AffineForm.var(t), eq=True)]
    return var_bounds(cons, t)


# --------------------------------------------------------------------------
# accesses


@dataclass(frozen=True)
class Access:
    buf: str
    idx: tuple  # Exprs
    mode: str  # "R", "W" or "+"
    ctx: tuple  # ("for", iter, lo, hi) / ("if", cond, positive)
    path: tuple = ()


_UIDS = itertools.count()


def collect_accesses(stmts, ctx=(), prefix=(), label="body", buffers=None, _ren=None, _uid=None):
    """Every buffer access made by `stmts`, with loop/branch context.

    `buffers` is the set of names that denote buffers (others are index
    variables).  Calls are expanded: callee accesses are mapped through
    window arguments onto caller buffers.
    """
    out = []
    uid = _uid if _uid is not None else _UIDS
    ren = dict(_ren or {})
    bufs = set(buffers) if buffers is not None else None
    for k, s in enumerate(stmts):
        path = prefix + ((label, k),)
        out.extend(_stmt_accesses(s, ctx, path, bufs, ren, uid))
        if isinstance(s, Alloc):
            if bufs is not None:
                bufs.add(s.name)
            # a local buffer shadows nothing (no shadowing allowed), but
            # distinct allocations with the same name must not alias
            ren[s.name] = f"{s.name}@{next(uid)}"
    return out


def _ren_expr(e, ren):
    if not ren:
        return e
    from .ir import map_expr
    from dataclasses import replace as dc_replace

    def fn(n):
        if isinstance(n, (Read, WindowExpr)) and n.name in ren:
            return dc_replace(n, name=ren[n.name])
        return None

    return map_expr(e, fn)


def _stmt_accesses(s, ctx, path, bufs, ren, uid):
    out = []

    def reads(e):
        from .ir import walk_expr

        e = _ren_expr(e, ren)
        for n in walk_expr(e):
            if isinstance(n, Read) and (bufs is None or _base(n.name) in bufs or n.idx):
                out.append(Access(n.name, n.idx, "R", ctx, path))

    if isinstance(s, For):
        it = s.iter
        nren = dict(ren)
        inner = ctx + (("for", it, _ren_expr(s.lo, ren), _ren_expr(s.hi, ren)),)
        out.extend(collect_accesses(s.body, inner, path, "body", bufs, nren, uid))
    elif isinstance(s, If):
        c = _ren_expr(s.cond, ren)
        out.extend(collect_accesses(s.body, ctx + (("if", c, True),), path, "body", bufs, ren, uid))
        out.extend(collect_accesses(s.orelse, ctx + (("if", c, False),), path, "orelse", bufs, ren, uid))
    elif isinstance(s, (Assign, Reduce)):
        reads(s.rhs)
        name = ren.get(s.name, s.name)
        idx = tuple(_ren_expr(i, ren) for i in s.idx)
        out.append(Access(name, idx, "W" if isinstance(s, Assign) else "+", ctx, path))
    elif isinstance(s, Call):
        out.extend(_call_accesses(s, ctx, path, bufs, ren, uid))
    return out


def _base(name):
    return name.split("@", 1)[0]


def _call_accesses(s, ctx, path, bufs, ren, uid):
    """Inline the callee's accesses, renaming its loop iterators."""
    callee = s.proc
    tag = next(uid)
    sizes = {}
    views = {}
    for formal, actual in zip(callee.args, s.args):
        actual = _ren_expr(actual, ren)
        if formal.is_size:
            sizes[formal.name] = actual
        elif isinstance(actual, WindowExpr):
            views[formal.name] = (actual.name, actual.idx)
        elif isinstance(actual, Read):
            # whole buffer, or one cell for a scalar formal
            if actual.idx:
                views[formal.name] = (actual.name, actual.idx)
            else:
                views[formal.name] = (actual.name, None)
        else:
            views[formal.name] = None  # scalar by value: a private constant
    inner = collect_accesses(callee.body, (), (), "body", set(a.name for a in callee.args if a.is_numeric), None, uid)
    out = []
    from .ir import subst

    for acc in inner:
        # rename callee iterators, substitute sizes
        its = {c[1]: Read(f"{c[1]}@c{tag}") for c in acc.ctx if c[0] == "for"}
        m = dict(sizes)
        m.update(its)
        nctx = []
        for c in acc.ctx:
            if c[0] == "for":
                nctx.append(("for", f"{c[1]}@c{tag}", subst(c[2], m), subst(c[3], m)))
            else:
                nctx.append(("if", subst(c[1], m), c[2]))
        idx = tuple(subst(i, m) for i in acc.idx)
        base = _base(acc.buf)
        if acc.buf != base or base not in views:
            continue  # callee-local buffer
        v = views[base]
        if v is None:
            if acc.mode != "R":
                continue
            continue
        bname, widx = v
        if widx is None:
            nidx = idx
        else:
            nidx = []
            it = iter(idx)
            for w in widx:
                if isinstance(w, Interval):
                    nidx.append(BinOp("+", w.lo, next(it)))
                else:
                    nidx.append(w)
            nidx = tuple(nidx)
        out.append(Access(bname, nidx, acc.mode, ctx + tuple(nctx), path))
    # value arguments read caller state
    for formal, actual in zip(callee.args, s.args):
        if formal.is_numeric and not formal.dims and not isinstance(actual, (Read, WindowExpr)):
            from .ir import walk_expr

            for n in walk_expr(_ren_expr(actual, ren)):
                if isinstance(n, Read) and n.idx:
                    out.append(Access(n.name, n.idx, "R", ctx, path))
    return out


def _ctx_cons(ctx, ren):
    """Linear constraints for an access context, with variable renaming."""
    cons = []
    m = {k: AffineForm.var(v) for k, v in ren.items()}
    for c in ctx:
        if c[0] == "for":
            it = ren.get(c[1], c[1])
            lo, hi = normalize(c[2], m), normalize(c[3], m)
            x = AffineForm.var(it)
            if lo is not None:
                cons.append(Lin.from_form(x - lo))
            if hi is not None:
                cons.append(Lin.from_form(hi - x - 1))
        else:
            dnf = _dnf(_ren_pred(c[1], ren), c[2])
            if dnf is not None and len(dnf) == 1:
                cons.extend(dnf[0])
    return cons


def _ren_pred(e, ren):
    if not ren:
        return e
    from .ir import subst

    return subst(e, {k: Read(v) for k, v in ren.items()})


def _conflict(a, b, reduce_commutes):
    if _base(a.buf) != _base(b.buf) or a.buf != b.buf:
        return False
    if a.mode == "R" and b.mode == "R":
        return False
    if a.mode == "+" and b.mode == "+" and reduce_commutes:
        return False
    return True


def may_conflict(facts, A, B, ren_a, ren_b, relation=(), reduce_commutes=True, trace=None):
    """True unless every conflicting access pair is proven disjoint.

    `ren_a`/`ren_b` rename variables (str -> str) for each side; inner
    iterators of each access context are renamed automatically.
    `relation` adds Lin constraints over the renamed variables."""
    for a in A:
        for b in B:
            if not _conflict(a, b, reduce_commutes):
                continue
            if len(a.idx) != len(b.idx):
                return True
            ra = dict(ren_a)
            rb = dict(ren_b)
            for c in a.ctx:
                if c[0] == "for" and c[1] not in ra:
                    ra[c[1]] = c[1] + "@a"
            for c in b.ctx:
                if c[0] == "for" and c[1] not in rb:
                    rb[c[1]] = c[1] + "@b"
            ma = {k: AffineForm.var(v) for k, v in ra.items()}
            mb = {k: AffineForm.var(v) for k, v in rb.items()}
            cons = list(facts.cons) + list(relation)
            cons += _ctx_cons(a.ctx, ra) + _ctx_cons(b.ctx, rb)
            ok = True
            for ia, ib in zip(a.idx, b.idx):
                fa, fb = normalize(ia, ma), normalize(ib, mb)
                if fa is None or fb is None:
                    ok = False
                    break
                cons.append(Lin.from_form(fa - fb, eq=True))
            if not ok:
                return True
            if not infeasible(cons, trace):
                if trace is not None:
                    from .printer import print_expr

                    trace.append(
                        f"possible conflict: {a.buf}[{', '.join(print_expr(i) for i in a.idx)}] ({a.mode})"
                        f" vs {b.buf}[{', '.join(print_expr(i) for i in b.idx)}] ({b.mode})"
                    )
                return True
    return False


def proc_buffers(p, extra=()):
    out = {a.name for a in p.args if a.is_numeric}
    for s in walk_stmts(p.body):
        if isinstance(s, Alloc):
            out.add(s.name)
    return out | set(extra)


INDEPENDENT = "independent"
MAY_DEPEND = "may-depend"


def dependence(sA, sB, facts=None, loop=None, buffers=None):
    """Do two statements (or statement lists) commute?

    Without `loop`, both run in the same environment.  With `loop =
    (iter, lo, hi)` the question is whether *different* iterations of the
    two commute (cross-iteration dependence)."""
    facts = facts or FactSet()
    A = collect_accesses(_as_list(sA), buffers=buffers)
    B = collect_accesses(_as_list(sB), buffers=buffers)
    if loop is None:
        return MAY_DEPEND if may_conflict(facts, A, B, {}, {}) else INDEPENDENT
    it, lo, hi = loop
    ra, rb = {it: it + "@1"}, {it: it + "@2"}
    f = facts.add_range(it + "@1", _ren_pred(lo, {}), hi).add_range(it + "@2", lo, hi)
    x1, x2 = AffineForm.var(it + "@1"), AffineForm.var(it + "@2")
    for rel in ([Lin.from_form(x2 - x1 - 1)], [Lin.from_form(x1 - x2 - 1)]):
        if may_conflict(f, A, B, ra, rb, rel):
            return MAY_DEPEND
    return INDEPENDENT


def _as_list(s):
    return list(s) if isinstance(s, (list, tuple)) else [s]


# --------------------------------------------------------------------------
# idempotence


YES = "yes"


def idempotent(stmts, buffers=None):
    """YES only if running `stmts` twice equals running them once."""
    stmts = _as_list(stmts)
    writes, reads = set(), set()
    for s in walk_stmts(stmts):
        if isinstance(s, Reduce):
            return UNKNOWN
        if isinstance(s, Call):
            callee = s.proc
            if idempotent(callee.body) != YES:
                return UNKNOWN
        if isinstance(s, Alloc):
            return UNKNOWN
    for acc in collect_accesses(stmts, buffers=buffers):
        if acc.mode == "R":
            reads.add(acc.buf)
        else:
            writes.add(acc.buf)
    if reads & writes:
        return UNKNOWN
    return YES


# --------------------------------------------------------------------------
# bounds inference


@dataclass(frozen=True)
class Window:
    dims: tuple  # ((lo AffineForm, hi AffineForm), ...)

    def __str__(self):
        return "[" + ", ".join(f"{lo}:{hi}" for lo, hi in self.dims) + "]"

    def to_exprs(self, order=None):
        return tuple((lo.to_expr(order), hi.to_expr(order)) for lo, hi in self.dims)


def _extreme(form, bound_ctx, want_max):
    """Bound `form` over the iterators in `bound_ctx` (innermost last)."""
    for c in reversed(bound_ctx):
        it, lo, hi = c
        coeff_direct = form.coeff(it)
        in_atoms = any(isinstance(v, DivAtom) and it in v.inner.names() for v, _ in form.coeffs)
        if coeff_direct == 0 and not in_atoms:
            continue
        lo_f, hi_f = lo, hi - 1
        new = AffineForm.constant(form.const)
        for v, k in form.coeffs:
            if v == it:
                use_max = (k > 0) == want_max
                new = new + (hi_f if use_max else lo_f).scale(k)
            elif isinstance(v, DivAtom) and it in v.inner.names():
                use_max = (k > 0) == want_max
                inner = _extreme(v.inner, [c], use_max)
                new = new + floor_div(inner, v.c).scale(k)
            else:
                new = new + AffineForm({v: k})
        form = new
    return form


def bounds_infer(scope, buffer, facts=None):
    """Per-dimension window of `buffer` indices accessed under `scope`.

    For a loop cursor the window is per iteration: the loop's own
    iterator stays free.  Iterators of loops nested inside are eliminated
    using their ranges."""
    from .cursors import BlockCursor, ForCursor

    p = scope.proc
    if isinstance(scope, ForCursor):
        stmts = scope.node().body
        base_facts = facts_at(p, scope.path + (("body", 0),))
    elif isinstance(scope, BlockCursor):
        stmts = scope.stmts()
        base_facts = facts_at(p, scope.parent_path + ((scope.label, scope.rng[0]),))
    else:
        stmts = [scope.node()]
        base_facts = facts_at(p, scope.path)
    if facts is not None:
        base_facts = base_facts.with_cons(facts.cons)
    accs = [a for a in collect_accesses(stmts) if a.buf == buffer]
    if not accs:
        raise AnalysisError(f"'{buffer}' is not accessed in the given scope")
    dims = None
    for a in accs:
        bound = []
        for c in a.ctx:
            if c[0] == "for":
                lo, hi = normalize(c[2]), normalize(c[3])
                if lo is None or hi is None:
                    raise AnalysisError(f"non-affine loop bound for '{c[1]}'")
                bound.append((c[1], lo, hi))
        row = []
        for i in a.idx:
            f = normalize(i)
            if f is None:
                raise AnalysisError(f"non-affine access to '{buffer}'")
            lo = _extreme(f, bound, False)
            hi = _extreme(f, bound, True) + 1
            row.append((lo, hi))
        if dims is None:
            dims = row
        else:
            if len(row) != len(dims):
                raise AnalysisError(f"inconsistent rank for '{buffer}'")
            dims = [
                (_min_form(base_facts, d[0], r[0]), _max_form(base_facts, d[1], r[1]))
                for d, r in zip(dims, row)
            ]
    return Window(tuple(dims))


def _cmp_forms(facts, a, b):
    """-1 if a <= b provably, 1 if a >= b provably, else None."""
    d = b - a
    if d.is_const():
        return -1 if d.const >= 0 else 1
    if infeasible(list(facts.cons) + [Lin.from_form(-d - 1)]):
        return -1
    if infeasible(list(facts.cons) + [Lin.from_form(d - 1)]):
        return 1
    return None


def _min_form(facts, a, b):
    c = _cmp_forms(facts, a, b)
    if c is None:
        raise AnalysisError(f"cannot order window bounds {a} and {b}")
    return a if c < 0 else b


def _max_form(facts, a, b):
    c = _cmp_forms(facts, a, b)
    if c is None:
        raise AnalysisError(f"cannot order window bounds {a} and {b}")
    return b if c < 0 else a


def simplify_index(e, facts=None, order=None):
    """Canonical affine rewrite of an index expression (or `e` unchanged)."""
    f = normalize(e)
    if f is None:
        return e
    if facts is not None:
        f = _fold_exact(_fold_atoms(f, facts), facts)
    try:
        return f.to_expr(order)
    except AnalysisError:
        return e


def _fold_atoms(f, facts):
    """Replace floor atoms whose value is fixed by the facts' ranges."""
    mapping = {}
    for v, _ in f.coeffs:
        if isinstance(v, DivAtom):
            inner = _fold_atoms(v.inner, facts)
            q_lo, q_hi = _div_range(facts, inner, v.c)
            if q_lo is not None and q_lo == q_hi:
                mapping[v] = AffineForm.constant(q_lo)
            else:
                # floor((c*k*x + r)/c) where 0 <= r < c provably
                mapping[v] = _split_div(facts, inner, v.c)
    return f.subst(mapping) if mapping else f


def _fold_exact(f, facts):
    """Cancel c*floor(e/c) against e when c provably divides e."""
    for v, _ in f.coeffs:
        if not isinstance(v, DivAtom):
            continue
        try:
            g = f.subst({v: v.inner.scale(Fraction(1, v.c))})
            if not g.is_integral():
                continue
            rem = v.inner - AffineForm.var(v).scale(v.c)
            if prove(facts, BinOp("==", rem.to_expr(), Const(0))) == VALID:
                f = g
        except AnalysisError:
            pass
    return f


def _div_range(facts, inner, c):
    lo, hi = form_bounds(facts, inner)
    if lo is None or hi is None:
        return None, None
    return lo // c, hi // c


def _split_div(facts, inner, c):
    """floor((c*Q + R)/c) = Q + floor(R/c); fold R if its range is tight."""
    whole, rest = {}, {}
    for v, k in inner.coeffs:
        if k % c == 0:
            whole[v] = k / c
        else:
            rest[v] = k
    r = AffineForm(rest, inner.const)
    q_lo, q_hi = _div_range(facts, r, c)
    if q_lo is not None and q_lo == q_hi:
        return AffineForm(whole, q_lo)
    return floor_div(inner, c)
