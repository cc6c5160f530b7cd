"""Symbolic scalar expressions over chart coordinates and named parameters.

Expressions are immutable, hash-consed DAG nodes: building the same
structure twice returns the same object, so identity comparison is
structural comparison and shared subexpressions are stored once.

Simplification is deliberately shallow: constant folding, neutral elements,
power flattening, and merging of terms that differ by a rational factor.
Identities are checked by numeric evaluation, never by symbolic
canonicalisation.

Expression grammar accepted by :func:`parse_expr`::

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := ("+" | "-") unary | power
    power    := atom (("^" | "**") exponent)?
    exponent := ["+" | "-"] INTEGER | "(" ["+" | "-"] INTEGER ")"
    atom     := NUMBER | IDENT | FUNC "(" expr ")" | "(" expr ")"
    FUNC     := "sin" | "cos"
    NUMBER   := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

CONST = "const"
PARAM = "param"
COORD = "coord"
ADD = "add"
MUL = "mul"
NEG = "neg"
DIV = "div"
POW = "pow"
SIN = "sin"
COS = "cos"


class SingularEvaluation(ArithmeticError):
    """Raised when an expression hits a pole (zero denominator) or overflows."""

    def __init__(self, message: str, points: Sequence[int] = ()):
        super().__init__(message)
        self.points = tuple(points)


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownSymbolError(ValueError):
    def __init__(self, name: str, position: int | None = None):
        where = "" if position is None else f" at position {position}"
        super().__init__(f"unknown symbol {name!r}{where}")
        self.name = name
        self.position = position


class Expr:
    """A hash-consed expression node. Build with the module constructors."""

    __slots__ = ("kind", "value", "args", "uid")

    def __init__(self, kind: str, value, args: tuple[Expr, ...], uid: int):
        self.kind = kind
        self.value = value
        self.args = args
        self.uid = uid

    def __repr__(self) -> str:
        return f"Expr({to_string(self)})"

    def __str__(self) -> str:
        return to_string(self)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if isinstance(n, Expr) and n.kind == CONST and n.value.denominator == 1:
            n = int(n.value)
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return power(self, n)

    @property
    def is_zero(self) -> bool:
        return self is ZERO

    @property
    def is_const(self) -> bool:
        return self.kind == CONST


_TABLE: dict[tuple, Expr] = {}
_LOCK = threading.Lock()
_COUNTER = [0]


def _intern(kind: str, value, args: tuple[Expr, ...] = ()) -> Expr:
    key = (kind, value, args)
    node = _TABLE.get(key)
    if node is not None:
        return node
    with _LOCK:
        node = _TABLE.get(key)
        if node is None:
            node = Expr(kind, value, args, _COUNTER[0])
            _COUNTER[0] += 1
            _TABLE[key] = node
    return node


def const(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite literal")
        value = Fraction(value)
    return _intern(CONST, Fraction(value))


ZERO = const(0)
ONE = const(1)


def param(name: str) -> Expr:
    return _intern(PARAM, name)


def coord(name: str) -> Expr:
    return _intern(COORD, name)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction, float, np.integer, np.floating)):
        return const(x if not isinstance(x, (np.integer, np.floating)) else x.item())
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def add(*terms) -> Expr:
    flat: list[Expr] = []
    c = Fraction(0)
    for t in terms:
        t = as_expr(t)
        parts = t.args if t.kind == ADD else (t,)
        for p in parts:
            if p.kind == CONST:
                c += p.value
            else:
                flat.append(p)
    flat = _collect_like_terms(flat)
    if c != 0:
        flat.append(const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return _intern(ADD, None, tuple(flat))


def _split_coeff(t: Expr) -> tuple[Fraction, Expr]:
    if t.kind == NEG:
        return Fraction(-1), t.args[0]
    if t.kind == MUL and t.args[0].kind == CONST:
        rest = t.args[1:]
        return t.args[0].value, rest[0] if len(rest) == 1 else _intern(MUL, None, rest)
    return Fraction(1), t


def _collect_like_terms(terms: list[Expr]) -> list[Expr]:
    """Merge terms that differ only by a rational factor (so x - x folds to 0)."""
    if len(terms) < 2:
        return terms
    split = [_split_coeff(t) for t in terms]
    if len({base.uid for _, base in split}) == len(split):
        return terms
    coeffs: dict[int, Fraction] = {}
    bases: dict[int, Expr] = {}
    for c, base in split:
        coeffs[base.uid] = coeffs.get(base.uid, Fraction(0)) + c
        bases.setdefault(base.uid, base)
    return [mul(const(c), bases[u]) for u, c in coeffs.items() if c != 0]


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    c = Fraction(1)
    for f in factors:
        f = as_expr(f)
        if f.kind == NEG:
            c = -c
            f = f.args[0]
        parts = f.args if f.kind == MUL else (f,)
        for p in parts:
            if p.kind == CONST:
                if p.value == 0:
                    return ZERO
                c *= p.value
            else:
                flat.append(p)
    if not flat:
        return const(c)
    if c == 1 and len(flat) == 1:
        return flat[0]
    if c == -1:
        inner = flat[0] if len(flat) == 1 else _intern(MUL, None, tuple(flat))
        return _intern(NEG, None, (inner,))
    if c != 1:
        flat.insert(0, const(c))
    return _intern(MUL, None, tuple(flat))


def neg(x) -> Expr:
    x = as_expr(x)
    if x.kind == CONST:
        return const(-x.value)
    if x.kind == NEG:
        return x.args[0]
    if x.kind == MUL and x.args[0].kind == CONST:
        return mul(const(-x.args[0].value), *x.args[1:])
    return _intern(NEG, None, (x,))


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if b.kind == CONST and b.value != 0:
        return mul(const(1 / b.value), a)
    if a is ZERO and b.kind != CONST:
        return ZERO
    if a.kind == NEG:
        return neg(div(a.args[0], b))
    if b.kind == NEG:
        return neg(div(a, b.args[0]))
    return _intern(DIV, None, (a, b))


def power(x, n: int) -> Expr:
    x = as_expr(x)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return x
    if x.kind == CONST and (x.value != 0 or n > 0):
        return const(x.value**n)
    if x.kind == POW:
        return power(x.args[0], x.value * n)
    if x.kind == NEG:
        inner = power(x.args[0], n)
        return inner if n % 2 == 0 else neg(inner)
    return _intern(POW, n, (x,))


def sin(x) -> Expr:
    x = as_expr(x)
    if x is ZERO:
        return ZERO
    if x.kind == NEG:
        return neg(sin(x.args[0]))
    return _intern(SIN, None, (x,))


def cos(x) -> Expr:
    x = as_expr(x)
    if x is ZERO:
        return ONE
    if x.kind == NEG:
        return cos(x.args[0])
    return _intern(COS, None, (x,))


# --------------------------------------------------------------------------
# traversal helpers


def _postorder(roots: Iterable[Expr], seen: set[int] | None = None) -> list[Expr]:
    """Children-before-parents order over the DAG spanned by ``roots``."""
    seen = set() if seen is None else seen
    order: list[Expr] = []
    for root in roots:
        if root.uid in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.uid in seen:
                continue
            seen.add(node.uid)
            stack.append((node, True))
            for child in reversed(node.args):
                if child.uid not in seen:
                    stack.append((child, False))
    return order


def node_count(roots: Iterable[Expr]) -> int:
    """Number of distinct nodes in the DAG."""
    return len(_postorder(roots))


def tree_size(roots: Iterable[Expr]) -> int:
    """Size the same expressions would have as plain (unshared) trees."""
    sizes: dict[int, int] = {}
    total = 0
    roots = list(roots)
    for node in _postorder(roots):
        sizes[node.uid] = 1 + sum(sizes[c.uid] for c in node.args)
    for r in roots:
        total += sizes[r.uid]
    return total


_FREE: dict[int, frozenset[str]] = {}


def free_symbols(e: Expr) -> frozenset[str]:
    """Names of every coordinate and parameter the expression depends on."""
    for node in _postorder([e]):
        if node.uid in _FREE:
            continue
        if node.kind in (PARAM, COORD):
            _FREE[node.uid] = frozenset((node.value,))
        elif not node.args:
            _FREE[node.uid] = frozenset()
        else:
            _FREE[node.uid] = frozenset().union(*(_FREE[c.uid] for c in node.args))
    return _FREE[e.uid]


# --------------------------------------------------------------------------
# differentiation

_DERIV: dict[tuple[int, str], Expr] = {}


def differentiate(e: Expr, v: str | Expr) -> Expr:
    """Exact partial derivative with respect to the coordinate ``v``.

    Parameters are constants here; derivatives are memoised per (node, v) so
    repeated differentiation of a shared DAG costs one pass.
    """
    if isinstance(v, Expr):
        if v.kind != COORD:
            return ZERO
        v = v.value
    e = as_expr(e)
    key = (e.uid, v)
    if key in _DERIV:
        return _DERIV[key]
    for node in _postorder([e]):
        k = (node.uid, v)
        if k in _DERIV:
            continue
        _DERIV[k] = _derive(node, v)
    return _DERIV[key]


def _d(node: Expr, v: str) -> Expr:
    return _DERIV[(node.uid, v)]


def _derive(node: Expr, v: str) -> Expr:
    kind = node.kind
    if kind in (CONST, PARAM):
        return ZERO
    if kind == COORD:
        return ONE if node.value == v else ZERO
    if kind == ADD:
        return add(*(_d(a, v) for a in node.args))
    if kind == MUL:
        terms = []
        args = node.args
        for i, a in enumerate(args):
            da = _d(a, v)
            if da is ZERO:
                continue
            terms.append(mul(*args[:i], da, *args[i + 1:]))
        return add(*terms)
    if kind == NEG:
        return neg(_d(node.args[0], v))
    if kind == DIV:
        a, b = node.args
        da, db = _d(a, v), _d(b, v)
        first = div(da, b)
        if db is ZERO:
            return first
        return add(first, neg(div(mul(a, db), power(b, 2))))
    if kind == POW:
        (x,) = node.args
        dx = _d(x, v)
        if dx is ZERO:
            return ZERO
        n = node.value
        return mul(n, power(x, n - 1), dx)
    if kind == SIN:
        (x,) = node.args
        return mul(cos(x), _d(x, v))
    if kind == COS:
        (x,) = node.args
        return neg(mul(sin(x), _d(x, v)))
    raise AssertionError(kind)


# --------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class Binding:
    """Values for chart coordinates and metric parameters at one point."""

    coords: Mapping[str, float] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)

    def values(self) -> dict[str, float]:
        out = dict(self.params)
        out.update(self.coords)
        return out

    def with_coords(self, **coords: float) -> Binding:
        merged = dict(self.coords)
        merged.update(coords)
        return Binding(merged, dict(self.params))

    def as_dict(self) -> dict:
        return {"coords": dict(self.coords), "params": dict(self.params)}


class Program:
    """A compiled evaluation schedule for a fixed list of root expressions.

    Evaluation walks the DAG once in topological order; intermediate values
    are released after their last use. Inputs may be floats or equal-length
    numpy arrays (one entry per sample point).
    """

    def __init__(self, roots: Sequence[Expr]):
        self.roots = [as_expr(r) for r in roots]
        order = _postorder(self.roots)
        slot = {node.uid: i for i, node in enumerate(order)}
        self.nodes = order
        self.code = [(n.kind, n.value, tuple(slot[c.uid] for c in n.args)) for n in order]
        self.root_slots = [slot[r.uid] for r in self.roots]
        last_use = {}
        for i, (_, _, kids) in enumerate(self.code):
            for k in kids:
                last_use[k] = i
        keep = set(self.root_slots)
        self.release: list[list[int]] = [[] for _ in order]
        for k, i in last_use.items():
            if k not in keep:
                self.release[i].append(k)
        self.symbols = frozenset(n.value for n in order if n.kind in (PARAM, COORD))

    def __len__(self) -> int:
        return len(self.nodes)

    def run(self, values: Mapping[str, object], absolute: bool = False) -> list:
        """Evaluate every root.

        With ``absolute`` set, each node is replaced by an upper bound on the
        magnitude of its terms (sums of absolute values, products of absolute
        values). The result is the scale against which round-off in the plain
        value should be judged.
        """
        if absolute:
            return self._run_abs(values)
        missing = self.symbols - set(values)
        if missing:
            raise UnknownSymbolError(sorted(missing)[0])
        vals: list = [None] * len(self.code)
        for i, (kind, value, kids) in enumerate(self.code):
            if kind == CONST:
                out = float(value)
            elif kind in (PARAM, COORD):
                out = values[value]
            elif kind == ADD:
                out = vals[kids[0]]
                for k in kids[1:]:
                    out = out + vals[k]
            elif kind == MUL:
                out = vals[kids[0]]
                for k in kids[1:]:
                    out = out * vals[k]
            elif kind == NEG:
                out = -vals[kids[0]]
            elif kind == DIV:
                den = vals[kids[1]]
                _check_nonzero(den, "division by zero")
                out = vals[kids[0]] / den
            elif kind == POW:
                base = vals[kids[0]]
                if value < 0:
                    _check_nonzero(base, "negative power of zero")
                    out = 1.0 / base ** (-value)
                else:
                    out = base**value
            elif kind == SIN:
                out = np.sin(vals[kids[0]])
            elif kind == COS:
                out = np.cos(vals[kids[0]])
            else:  # pragma: no cover
                raise AssertionError(kind)
            vals[i] = out
            for k in self.release[i]:
                vals[k] = None
        results = [vals[s] for s in self.root_slots]
        for res in results:
            if not np.all(np.isfinite(res)):
                bad = np.flatnonzero(~np.isfinite(np.atleast_1d(res)))
                raise SingularEvaluation("non-finite value", bad.tolist())
        return results

    def _run_abs(self, values: Mapping[str, object]) -> list:
        missing = self.symbols - set(values)
        if missing:
            raise UnknownSymbolError(sorted(missing)[0])
        vals: list = [None] * len(self.code)
        for i, (kind, value, kids) in enumerate(self.code):
            if kind == CONST:
                out = abs(float(value))
            elif kind in (PARAM, COORD):
                out = np.abs(values[value])
            elif kind == ADD:
                out = vals[kids[0]]
                for k in kids[1:]:
                    out = out + vals[k]
            elif kind == MUL:
                out = vals[kids[0]]
                for k in kids[1:]:
                    out = out * vals[k]
            elif kind == NEG:
                out = vals[kids[0]]
            elif kind == DIV:
                den = vals[kids[1]]
                _check_nonzero(den, "division by zero")
                out = vals[kids[0]] / den
            elif kind == POW:
                base = vals[kids[0]]
                if value < 0:
                    _check_nonzero(base, "negative power of zero")
                    out = 1.0 / base ** (-value)
                else:
                    out = base**value
            elif kind == SIN:
                out = np.abs(np.sin(Program([self.nodes[kids[0]]]).run(values)[0]))
            elif kind == COS:
                out = np.abs(np.cos(Program([self.nodes[kids[0]]]).run(values)[0]))
            else:  # pragma: no cover
                raise AssertionError(kind)
            vals[i] = out
            for k in self.release[i]:
                vals[k] = None
        results = [vals[s] for s in self.root_slots]
        for res in results:
            if not np.all(np.isfinite(res)):
                bad = np.flatnonzero(~np.isfinite(np.atleast_1d(res)))
                raise SingularEvaluation("non-finite value", bad.tolist())
        return results


def _check_nonzero(den, what: str) -> None:
    if isinstance(den, np.ndarray):
        bad = np.flatnonzero(den == 0)
        if bad.size:
            raise SingularEvaluation(f"singular evaluation: {what}", bad.tolist())
    elif den == 0:
        raise SingularEvaluation(f"singular evaluation: {what}", [0])


def evaluate(e, bnd: Binding | Mapping[str, float]) -> float:
    """Evaluate one expression at one binding (all free symbols must be bound)."""
    values = bnd.values() if isinstance(bnd, Binding) else dict(bnd)
    (out,) = Program([as_expr(e)]).run({k: float(v) for k, v in values.items()})
    return float(out)


def stack_bindings(points: Sequence[Binding]) -> dict[str, np.ndarray]:
    """Column-stack bindings into name -> array(len(points))."""
    if not points:
        return {}
    names = set(points[0].values())
    for p in points[1:]:
        names &= set(p.values())
    return {n: np.array([p.values()[n] for p in points], dtype=float) for n in sorted(names)}


def evaluate_many(exprs: Sequence[Expr], points: Sequence[Binding]) -> np.ndarray:
    """Evaluate expressions at many points at once -> array (len(exprs), len(points))."""
    exprs = [as_expr(e) for e in exprs]
    if not points:
        return np.zeros((len(exprs), 0))
    cols = stack_bindings(points)
    out = Program(exprs).run(cols)
    n = len(points)
    return np.array([np.broadcast_to(np.asarray(o, dtype=float), (n,)) for o in out]).reshape(len(exprs), n)


# --------------------------------------------------------------------------
# printing and parsing

def _one_group(text: str) -> bool:
    """True when ``text`` is a single parenthesised group, e.g. "(a + b)" but not "(a)*(b)"."""
    depth = 0
    for i, ch in enumerate(text):
        depth += ch == "("
        depth -= ch == ")"
        if depth == 0:
            return i == len(text) - 1
    return False


_PREC = {ADD: 1, NEG: 2, MUL: 3, DIV: 3, POW: 4}


def to_string(e: Expr) -> str:
    kind = e.kind
    if kind == CONST:
        v = e.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if kind in (PARAM, COORD):
        return e.value
    if kind in (SIN, COS):
        return f"{kind}({to_string(e.args[0])})"

    def wrap(child: Expr, min_prec: int) -> str:
        s = to_string(child)
        p = _PREC.get(child.kind, 5)
        if child.kind == CONST and (child.value < 0 or child.value.denominator != 1):
            p = 2
        return f"({s})" if p < min_prec else s

    if kind == ADD:
        out = wrap(e.args[0], 1)
        for a in e.args[1:]:
            if a.kind == NEG:
                out += " - " + wrap(a.args[0], 2)
            else:
                out += " + " + wrap(a, 2)
        return out
    if kind == NEG:
        inner = wrap(e.args[0], 3)
        # "-2*x" or "-(3/4)*x" would read back as a negative literal times x
        leading_literal = inner[0].isdigit() or (inner[0] == "(" and not _one_group(inner))
        return f"-({inner})" if leading_literal else "-" + inner
    if kind == MUL:
        # a quotient after the first factor needs parentheses: x*(y/z) is not (x*y)/z
        return "*".join(wrap(a, 3 if i == 0 else 4) for i, a in enumerate(e.args))
    if kind == DIV:
        return f"{wrap(e.args[0], 3)}/{wrap(e.args[1], 4)}"
    if kind == POW:
        return f"{wrap(e.args[0], 5)}^{e.value}" if e.value > 0 else f"{wrap(e.args[0], 5)}^({e.value})"
    raise AssertionError(kind)


def symbol_table(coords: Iterable[str] = (), params: Iterable[str] = (), defs: Mapping[str, Expr] | None = None) -> dict[str, Expr]:
    table: dict[str, Expr] = {c: coord(c) for c in coords}
    for p in params:
        table[p] = param(p)
    if defs:
        table.update(defs)
    return table


_FUNCS = {"sin": sin, "cos": cos}


class _Parser:
    def __init__(self, text: str, symbols: Mapping[str, Expr]):
        self.text = text
        self.symbols = symbols
        self.tokens = list(self._tokenize(text))
        self.i = 0

    @staticmethod
    def _tokenize(text: str):
        i, n = 0, len(text)
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
            elif ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
                j = i
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and text[j] == ".":
                    j += 1
                    while j < n and text[j].isdigit():
                        j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        while k < n and text[k].isdigit():
                            k += 1
                        j = k
                yield ("num", text[i:j], i)
                i = j
            elif ch.isalpha() or ch == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                yield ("id", text[i:j], i)
                i = j
            elif text.startswith("**", i):
                yield ("op", "^", i)
                i += 2
            elif ch in "+-*/^(),":
                yield ("op", ch, i)
                i += 1
            else:
                raise ExprSyntaxError(f"unexpected character {ch!r}", i)
        yield ("end", "", n)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            inner = self.unary()
            return inner if val == "+" else neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return power(base, self.exponent())
        return base

    def exponent(self) -> int:
        kind, val, pos = self.peek()
        paren = kind == "op" and val == "("
        if paren:
            self.take()
        sign = 1
        kind, val, pos = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            sign = -1 if val == "-" else 1
        kind, val, pos = self.take()
        if kind != "num" or not val.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        if paren:
            self.expect(")")
        return sign * int(val)

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return const(Fraction(val))
        if kind == "id":
            if val in _FUNCS and self.peek()[1] == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                return _FUNCS[val](arg)
            if val not in self.symbols:
                raise UnknownSymbolError(val, pos)
            return self.symbols[val]
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def parse_expr(text: str, symbols: Mapping[str, Expr]) -> Expr:
    """Parse ``text`` into an :class:`Expr` using the given symbol table."""
    return _Parser(str(text), symbols).parse()
