"""Dense tensors and the curvature pipeline.

Components are numpy arrays holding either :class:`~curvlab.expr.Expr`
objects (symbolic mode) or floats (evaluated mode). Evaluated tensors carry
a leading batch axis with one entry per sample point. The algebra helpers
use ``einsum`` with a ``...`` batch prefix, so the same code serves both
modes.

Index conventions (all checked against closed-form Hayward components):

* Christoffel ``Gamma[a, b, c]`` is the connection coefficient with ``a`` up.
* ``R[p, q, m, n] = g[p, a] * (d_m Gamma[a, q, n] - d_n Gamma[a, q, m]
  + Gamma[b, q, n] Gamma[a, b, m] - Gamma[b, q, m] Gamma[a, b, n])``.
* ``S[b, c] = g^{ad} R[a, b, c, d]``; kappa is the trace of ``g^{-1} S``.
* Covariant derivatives append the differentiation index last.
"""

from __future__ import annotations

import itertools
import string
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .chart import MetricSpec
from .expr import Binding, Expr, Program

_LETTERS = string.ascii_lowercase


class SingularMetricError(ValueError):
    """The metric determinant is symbolically zero."""


class Tensor:
    """Component array plus index positions (``"u"``/``"d"`` per slot)."""

    __slots__ = ("data", "positions", "name", "symmetries")

    def __init__(self, data, positions: str, name: str = "", symmetries: Sequence[str] = ()):
        data = np.asarray(data)
        rank = len(positions)
        if any(p not in "ud" for p in positions):
            raise ValueError("positions must be a string of 'u'/'d'")
        if data.ndim not in (rank, rank + 1):
            raise ValueError(f"array of ndim {data.ndim} does not fit {rank} indices")
        if rank and len(set(data.shape[data.ndim - rank:])) != 1:
            raise ValueError("all tensor slots must have the same dimension")
        self.data = data
        self.positions = positions
        self.name = name
        self.symmetries = tuple(symmetries)

    # -- shape ----------------------------------------------------------------
    @property
    def rank(self) -> int:
        return len(self.positions)

    @property
    def n(self) -> int:
        return self.data.shape[-1]

    @property
    def symbolic(self) -> bool:
        return self.data.dtype == object

    @property
    def batched(self) -> bool:
        return self.data.ndim == self.rank + 1

    @property
    def batch_size(self) -> int | None:
        return self.data.shape[0] if self.batched else None

    def __repr__(self) -> str:
        mode = "symbolic" if self.symbolic else "numeric"
        return f"Tensor({self.name or '?'}, {self.positions}, {mode}, shape={self.data.shape})"

    def comp(self, *idx: int):
        """Component by 1-based indices; batched tensors return one value per point."""
        if len(idx) != self.rank:
            raise IndexError(f"{self.name or 'tensor'} needs {self.rank} indices")
        if any(not 1 <= i <= self.n for i in idx):
            raise IndexError(f"index out of range 1..{self.n}: {idx}")
        z = tuple(i - 1 for i in idx)
        return self.data[(slice(None),) + z] if self.batched else self.data[z]

    def at(self, k: int) -> Tensor:
        if not self.batched:
            raise ValueError("tensor has no batch axis")
        return Tensor(self.data[k], self.positions, self.name, self.symmetries)

    def flat(self) -> np.ndarray:
        """(batch, n**rank) for batched tensors, else (n**rank,)."""
        if self.batched:
            return self.data.reshape(self.data.shape[0], -1)
        return self.data.reshape(-1)

    def renamed(self, name: str) -> Tensor:
        return Tensor(self.data, self.positions, name, self.symmetries)

    # -- arithmetic -----------------------------------------------------------
    def _scalar(self, c):
        if isinstance(c, np.ndarray) and c.ndim == 1 and self.batched:
            return c.reshape((-1,) + (1,) * self.rank)
        return c

    def _check(self, other: Tensor):
        if self.positions != other.positions:
            raise ValueError(f"index positions differ: {self.positions} vs {other.positions}")

    def __add__(self, other: Tensor) -> Tensor:
        self._check(other)
        return Tensor(self.data + other.data, self.positions)

    def __sub__(self, other: Tensor) -> Tensor:
        self._check(other)
        return Tensor(self.data - other.data, self.positions)

    def __neg__(self) -> Tensor:
        return Tensor(-self.data, self.positions)

    def __mul__(self, c) -> Tensor:
        if isinstance(c, Tensor):
            raise TypeError("use outer() for tensor products")
        return Tensor(self.data * self._scalar(c), self.positions)

    __rmul__ = __mul__

    def __truediv__(self, c) -> Tensor:
        return Tensor(self.data / self._scalar(c), self.positions)

    # -- evaluation -----------------------------------------------------------
    def evaluate(self, points: Sequence[Binding] | Mapping[str, np.ndarray]) -> Tensor:
        """Evaluate a symbolic tensor at many points (batch axis first)."""
        if not self.symbolic:
            raise ValueError("tensor is already numeric")
        cols = ex.stack_bindings(points) if not isinstance(points, Mapping) else points
        size = _col_size(cols)
        return Tensor(_evaluate_array(self.data, cols, size), self.positions, self.name, self.symmetries)

    def magnitude(self, points: Sequence[Binding] | Mapping[str, np.ndarray]) -> np.ndarray:
        """Per-point round-off scale: sup over components of the term-wise absolute value."""
        if not self.symbolic:
            raise ValueError("magnitude needs a symbolic tensor")
        cols = ex.stack_bindings(points) if not isinstance(points, Mapping) else points
        size = _col_size(cols)
        vals = _evaluate_array(self.data, cols, size, absolute=True)
        return vals.reshape(size, -1).max(axis=1)

    def max_abs(self) -> np.ndarray | float:
        if self.batched:
            return np.abs(self.flat()).max(axis=1)
        return float(np.abs(self.flat()).max())


def _col_size(cols: Mapping[str, np.ndarray]) -> int:
    sizes = {np.asarray(v).size for v in cols.values() if np.ndim(v) > 0}
    if len(sizes) > 1:
        raise ValueError("inconsistent point columns")
    return sizes.pop() if sizes else 1


def _evaluate_array(
    arr: np.ndarray, cols: Mapping[str, np.ndarray], size: int, absolute: bool = False
) -> np.ndarray:
    flat = [ex.as_expr(e) for e in arr.ravel()]
    out = np.zeros((size, len(flat)))
    live = [k for k, e in enumerate(flat) if not e.is_zero]
    if live:
        values = Program([flat[k] for k in live]).run(cols, absolute=absolute)
        for k, v in zip(live, values):
            out[:, k] = v
    return out.reshape((size,) + arr.shape)


def evaluate_scalar(e: Expr, points: Sequence[Binding] | Mapping[str, np.ndarray]) -> np.ndarray:
    cols = ex.stack_bindings(points) if not isinstance(points, Mapping) else points
    size = _col_size(cols)
    return _evaluate_array(np.array([e], dtype=object), cols, size)[:, 0]


def _ein(spec: str, *arrays: np.ndarray) -> np.ndarray:
    """einsum with an implicit leading batch axis on every operand and the output."""
    ins, out = spec.split("->")
    ins = ",".join("..." + s for s in ins.split(","))
    dtype_obj = any(a.dtype == object for a in arrays)
    res = np.einsum(f"{ins}->...{out}", *arrays, optimize=not dtype_obj)
    if dtype_obj:
        res = _exprs(res)
    return res


def _exprs(arr) -> np.ndarray:
    """Normalise an object array so every entry is an Expr."""
    arr = np.asarray(arr, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = ex.as_expr(arr[idx])
    return out


def _lift(T: Tensor, other: Tensor) -> np.ndarray:
    """Give an unbatched tensor a batch axis when combined with a batched one."""
    if other.batched and not T.batched:
        return T.data[None, ...]
    return T.data


# --------------------------------------------------------------------------
# algebra (mode-agnostic)


def outer(A: Tensor, B: Tensor) -> Tensor:
    a, b = _lift(A, B), _lift(B, A)
    la, lb = _LETTERS[: A.rank], _LETTERS[A.rank : A.rank + B.rank]
    return Tensor(_ein(f"{la},{lb}->{la}{lb}", a, b), A.positions + B.positions)


def kulkarni_nomizu(A: Tensor, U: Tensor) -> Tensor:
    """(A wedge U)_{pqmn} = A_pn U_qm - A_pm U_qn + A_qm U_pn - A_qn U_pm."""
    for T in (A, U):
        if T.positions != "dd":
            raise ValueError("Kulkarni-Nomizu product needs (0,2) tensors")
        if not _is_symmetric(T):
            raise ValueError("Kulkarni-Nomizu product needs symmetric tensors")
    a, u = _lift(A, U), _lift(U, A)
    out = _ein("pn,qm->pqmn", a, u) - _ein("pm,qn->pqmn", a, u) + _ein("qm,pn->pqmn", a, u) - _ein("qn,pm->pqmn", a, u)
    if out.dtype == object:
        out = _exprs(out)
    return Tensor(out, "dddd", symmetries=RIEMANN_SYMMETRIES)


def _is_symmetric(T: Tensor) -> bool:
    d = T.data
    if T.symbolic:
        # symbolic symmetry is not decidable without a canonical form; it is
        # re-checked numerically once the tensor is evaluated
        return True
    asym = np.abs(d - np.swapaxes(d, -1, -2)).max()
    # relative test, plus an absolute floor for tensors that are pure round-off
    return bool(asym <= 1e-10 * np.abs(d).max() or asym <= 1e-12)


def change_index(T: Tensor, slot: int, metric: Tensor) -> Tensor:
    """Raise (metric = g^-1) or lower (metric = g) the 1-based ``slot``."""
    s = slot - 1
    if not 0 <= s < T.rank:
        raise IndexError(f"slot {slot} out of range for rank {T.rank}")
    want = "u" if metric.positions == "uu" else "d"
    if T.positions[s] == want:
        raise ValueError(f"slot {slot} is already {'up' if want == 'u' else 'down'}")
    idx = _LETTERS[: T.rank]
    src = idx[:s] + "z" + idx[s + 1 :]
    data = _ein(f"{idx[s]}z,{src}->{idx}", _lift(metric, T), _lift(T, metric))
    return Tensor(data, T.positions[:s] + want + T.positions[s + 1 :])


def raise_index(T: Tensor, slot: int, ginv: Tensor) -> Tensor:
    return change_index(T, slot, ginv)


def lower_index(T: Tensor, slot: int, g: Tensor) -> Tensor:
    return change_index(T, slot, g)


def contract(T: Tensor, slot_a: int, slot_b: int, metric: Tensor | None = None) -> Tensor | np.ndarray | Expr:
    """Trace over two 1-based slots. Two lower (upper) slots need g^-1 (g)."""
    a, b = slot_a - 1, slot_b - 1
    if a == b or not (0 <= a < T.rank and 0 <= b < T.rank):
        raise IndexError("need two distinct valid slots")
    idx = list(_LETTERS[: T.rank])
    pa, pb = T.positions[a], T.positions[b]
    keep = "".join(c for k, c in enumerate(idx) if k not in (a, b))
    keep_pos = "".join(p for k, p in enumerate(T.positions) if k not in (a, b))
    if pa != pb:
        idx[b] = idx[a]
        data = _ein(f"{''.join(idx)}->{keep}", T.data)
    else:
        if metric is None:
            raise ValueError("contracting two same-position slots needs a metric")
        need = "uu" if pa == "d" else "dd"
        if metric.positions != need:
            raise ValueError(f"contraction needs a metric with positions {need}")
        data = _ein(f"{idx[a]}{idx[b]},{''.join(idx)}->{keep}", _lift(metric, T), _lift(T, metric))
    if not keep:
        data = np.asarray(data)
        return data[()] if data.ndim == 0 else data
    return Tensor(data, keep_pos)


def ricci_power(S: Tensor, ginv: Tensor, k: int) -> Tensor:
    """(S^k)_{ab} = S_{a c} g^{cd} (S^{k-1})_{d b}; S^0 is g is not returned here."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = S
    for _ in range(k - 1):
        data = _ein("ac,cd,db->ab", _lift(S, ginv), _lift(ginv, S), out.data)
        if data.dtype != object:
            # exact symmetry is lost to rounding; restore it
            data = 0.5 * (data + np.swapaxes(data, -1, -2))
        out = Tensor(data, "dd")
    return out


# --------------------------------------------------------------------------
# symmetries

RIEMANN_SYMMETRIES = ("antisym(1,2)", "antisym(3,4)", "pair(12,34)", "bianchi")


def symmetry_residuals(T: Tensor, tags: Sequence[str] | None = None, scale=None) -> dict[str, float]:
    """Relative violation of each declared symmetry tag (numeric tensors).

    ``scale`` defaults to the largest component; pass a round-off magnitude
    (see :meth:`Tensor.magnitude`) for tensors that may vanish identically.
    """
    if T.symbolic:
        raise ValueError("evaluate the tensor first")
    d = T.data
    off = 1 if T.batched else 0
    ref = float(np.abs(d).max()) if scale is None else float(np.max(scale))
    scale = max(ref, 1e-300)
    out: dict[str, float] = {}
    for tag in tags if tags is not None else T.symmetries:
        kind, arg = tag.split("(", 1) if "(" in tag else (tag, "")
        arg = arg.rstrip(")")
        if kind in ("sym", "antisym"):
            i, j = (int(x) - 1 + off for x in arg.split(","))
            sw = np.swapaxes(d, i, j)
            diff = d - sw if kind == "sym" else d + sw
        elif kind == "pair":
            perm = list(range(d.ndim))
            perm[off : off + 4] = [off + 2, off + 3, off, off + 1]
            diff = d - np.transpose(d, perm)
        elif kind == "cyclic":
            i, j, k = (int(x) - 1 + off for x in arg.split(","))
            p = list(range(d.ndim))
            c1, c2 = list(p), list(p)
            # T_{..i j k..} + T_{..j k i..} + T_{..k i j..}
            c1[i], c1[j], c1[k] = j, k, i
            c2[i], c2[j], c2[k] = k, i, j
            diff = d + np.transpose(d, c1) + np.transpose(d, c2)
        elif kind == "bianchi":
            # R_{pqmn} + R_{pmnq} + R_{pnqm}
            p = list(range(d.ndim))
            b = off
            c1 = np.transpose(d, p[:b] + [b, b + 2, b + 3, b + 1] + p[b + 4 :])
            c2 = np.transpose(d, p[:b] + [b, b + 3, b + 1, b + 2] + p[b + 4 :])
            diff = d + c1 + c2
        else:
            raise ValueError(f"unknown symmetry tag {tag!r}")
        out[tag] = float(np.abs(diff).max()) / scale
    return out


# --------------------------------------------------------------------------
# symbolic geometry


def _zero_array(shape) -> np.ndarray:
    arr = np.empty(shape, dtype=object)
    arr.fill(ex.ZERO)
    return arr


def _det(M: list[list[Expr]]) -> Expr:
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return ex.add(ex.mul(M[0][0], M[1][1]), ex.neg(ex.mul(M[0][1], M[1][0])))
    # expand along the row with most zeros
    row = max(range(n), key=lambda i: sum(e.is_zero for e in M[i]))
    terms = []
    for j in range(n):
        if M[row][j].is_zero:
            continue
        minor = [[M[i][k] for k in range(n) if k != j] for i in range(n) if i != row]
        t = ex.mul(M[row][j], _det(minor))
        terms.append(t if (row + j) % 2 == 0 else ex.neg(t))
    return ex.add(*terms)


def symbolic_inverse(g: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric Expr matrix via the adjugate (diagonal fast path)."""
    n = g.shape[0]
    inv = _zero_array((n, n))
    diagonal = all(g[i, j].is_zero for i in range(n) for j in range(n) if i != j)
    if diagonal:
        for i in range(n):
            if g[i, i].is_zero:
                raise SingularMetricError("metric determinant is identically zero")
            inv[i, i] = ex.div(ex.ONE, g[i, i])
        return inv
    M = [[g[i, j] for j in range(n)] for i in range(n)]
    det = _det(M)
    if det.is_zero:
        raise SingularMetricError("metric determinant is identically zero")
    for i in range(n):
        for j in range(i, n):
            minor = [[M[a][b] for b in range(n) if b != i] for a in range(n) if a != j]
            cof = _det(minor)
            if (i + j) % 2:
                cof = ex.neg(cof)
            inv[i, j] = inv[j, i] = ex.div(cof, det)
    return inv


def partial(T: Tensor, coords: Sequence[str]) -> np.ndarray:
    """Array of partial derivatives, derivative index appended last."""
    d = T.data
    out = np.empty(d.shape + (len(coords),), dtype=object)
    for idx in np.ndindex(d.shape):
        e = d[idx]
        for k, c in enumerate(coords):
            out[idx + (k,)] = ex.differentiate(e, c)
    return out


class Geometry:
    """Lazily built symbolic curvature tower of a metric.

    Every attribute is computed once and shared; everything stays symbolic
    so derivatives are exact. Use :meth:`at` to evaluate at sample points.
    """

    def __init__(self, spec: MetricSpec):
        self.spec = spec
        self.n = spec.n
        self.coords = spec.coords

    @cached_property
    def g(self) -> Tensor:
        return Tensor(np.array(self.spec.g, dtype=object), "dd", "g", ("sym(1,2)",))

    @cached_property
    def ginv(self) -> Tensor:
        return Tensor(symbolic_inverse(self.g.data), "uu", "g^-1", ("sym(1,2)",))

    @cached_property
    def dg(self) -> np.ndarray:
        return partial(self.g, self.coords)

    @cached_property
    def christoffel(self) -> Tensor:
        n, dg, gi = self.n, self.dg, self.ginv.data
        G = _zero_array((n, n, n))
        for b in range(n):
            for c in range(b, n):
                # lowered symbol [d, bc]
                low = [ex.add(dg[d, c, b], dg[d, b, c], ex.neg(dg[b, c, d])) for d in range(n)]
                for a in range(n):
                    s = ex.add(*(ex.mul(gi[a, d], low[d]) for d in range(n)))
                    G[a, b, c] = G[a, c, b] = ex.mul(ex.const(ex.Fraction(1, 2)), s)
        return Tensor(G, "udd", "Gamma", ("sym(2,3)",))

    @cached_property
    def riemann_mixed(self) -> Tensor:
        """R^a_{qmn} with the derivative pair (m, n) last."""
        n = self.n
        G = self.christoffel.data
        dG = partial(self.christoffel, self.coords)  # dG[a,q,n,m] = d_m Gamma^a_{qn}
        Rm = _zero_array((n, n, n, n))
        for a, q, m, nn in itertools.product(range(n), repeat=4):
            if m == nn:
                continue
            terms = [dG[a, q, nn, m], ex.neg(dG[a, q, m, nn])]
            for b in range(n):
                terms.append(ex.mul(G[b, q, nn], G[a, b, m]))
                terms.append(ex.neg(ex.mul(G[b, q, m], G[a, b, nn])))
            Rm[a, q, m, nn] = ex.add(*terms)
        return Tensor(Rm, "uddd", "R^a_qmn")

    @cached_property
    def riemann(self) -> Tensor:
        data = _ein("pa,aqmn->pqmn", self.g.data, self.riemann_mixed.data)
        return Tensor(data, "dddd", "R", RIEMANN_SYMMETRIES)

    @cached_property
    def riemann13(self) -> Tensor:
        """(1,3) curvature with the first slot raised: g^{ae} R_{ebcd}."""
        return raise_index(self.riemann, 1, self.ginv).renamed("R~")

    @cached_property
    def ricci(self) -> Tensor:
        data = _ein("ad,abcd->bc", self.ginv.data, self.riemann.data)
        return Tensor(data, "dd", "S", ("sym(1,2)",))

    @cached_property
    def ricci_operator(self) -> Tensor:
        return raise_index(self.ricci, 1, self.ginv).renamed("J")

    @cached_property
    def scalar(self) -> Expr:
        return contract(self.ricci_operator, 1, 2)

    def ricci_power(self, k: int) -> Tensor:
        return ricci_power(self.ricci, self.ginv, k).renamed(f"S^{k}")

    # -- Kulkarni-Nomizu products ------------------------------------------
    @cached_property
    def gg(self) -> Tensor:
        return kulkarni_nomizu(self.g, self.g).renamed("g^g")

    @cached_property
    def gS(self) -> Tensor:
        return kulkarni_nomizu(self.g, self.ricci).renamed("g^S")

    @cached_property
    def SS(self) -> Tensor:
        return kulkarni_nomizu(self.ricci, self.ricci).renamed("S^S")

    # -- derived curvature tensors -------------------------------------------
    @cached_property
    def conformal(self) -> Tensor:
        n, k = self.n, self.scalar
        c1 = ex.mul(ex.const(ex.Fraction(1, 2 * (n - 1) * (n - 2))), k)
        data = _combine(self.riemann.data, (c1, self.gg.data), (ex.const(ex.Fraction(-1, n - 2)), self.gS.data))
        return Tensor(data, "dddd", "C", RIEMANN_SYMMETRIES)

    @cached_property
    def concircular(self) -> Tensor:
        n, k = self.n, self.scalar
        c1 = ex.mul(ex.const(ex.Fraction(-1, 2 * n * (n - 1))), k)
        return Tensor(_combine(self.riemann.data, (c1, self.gg.data)), "dddd", "W", RIEMANN_SYMMETRIES)

    @cached_property
    def conharmonic(self) -> Tensor:
        c = ex.const(ex.Fraction(-1, self.n - 2))
        return Tensor(_combine(self.riemann.data, (c, self.gS.data)), "dddd", "K", RIEMANN_SYMMETRIES)

    @cached_property
    def projective(self) -> Tensor:
        g, S = self.g.data, self.ricci.data
        corr = _exprs(np.einsum("pn,qm->pqmn", g, S) - np.einsum("qn,pm->pqmn", g, S))
        c = ex.const(ex.Fraction(-1, self.n - 1))
        return Tensor(_combine(self.riemann.data, (c, corr)), "dddd", "P", ("antisym(1,2)", "cyclic(1,2,3)"))

    def curvature(self, kind: str) -> Tensor:
        """One of R, C, W, K, P by letter."""
        table = {"R": "riemann", "C": "conformal", "W": "concircular", "K": "conharmonic", "P": "projective"}
        if kind not in table:
            raise ValueError(f"unknown curvature kind {kind!r}")
        return getattr(self, table[kind])

    # -- derivatives -----------------------------------------------------------
    def covariant_derivative(self, T: Tensor) -> Tensor:
        """nabla T for a symbolic (0,k) tensor, derivative index last."""
        if set(T.positions) - {"d"}:
            raise ValueError("covariant_derivative expects a (0,k) tensor")
        if not T.symbolic:
            raise ValueError("covariant_derivative needs a symbolic tensor")
        k = T.rank
        idx = _LETTERS[:k]
        out = partial(T, self.coords)
        G = self.christoffel.data
        for s in range(k):
            src = idx[:s] + "z" + idx[s + 1 :]
            out = out - np.einsum(f"zy{idx[s]},{src}->{idx}y", G, T.data)
        return Tensor(_exprs(out), "d" * (k + 1), f"nabla {T.name}".strip())

    @cached_property
    def nabla_riemann(self) -> Tensor:
        return self.covariant_derivative(self.riemann).renamed("nabla R")

    @cached_property
    def nabla_ricci(self) -> Tensor:
        return self.covariant_derivative(self.ricci).renamed("nabla S")

    _nabla_cache: dict

    def nabla(self, kind: str) -> Tensor:
        cache = self.__dict__.setdefault("_nabla_cache", {})
        if kind not in cache:
            cache[kind] = self.covariant_derivative(self.curvature(kind)).renamed(f"nabla {kind}")
        return cache[kind]

    # -- evaluation ------------------------------------------------------------
    def at(self, points: Sequence[Binding]) -> PointGeometry:
        return PointGeometry(self, points)


def _combine(base: np.ndarray, *terms: tuple[Expr, np.ndarray]) -> np.ndarray:
    out = np.empty(base.shape, dtype=object)
    for idx in np.ndindex(base.shape):
        parts = [base[idx]]
        for c, arr in terms:
            parts.append(ex.mul(c, arr[idx]))
        out[idx] = ex.add(*parts)
    return out


class PointGeometry:
    """Numeric view of a :class:`Geometry` at a fixed list of sample points.

    Attribute names mirror :class:`Geometry`; each symbolic tensor is
    evaluated once (batch axis first) and cached.
    """

    _SYMBOLIC = (
        "g",
        "ginv",
        "christoffel",
        "riemann",
        "riemann13",
        "ricci",
        "ricci_operator",
        "gg",
        "gS",
        "SS",
        "conformal",
        "concircular",
        "conharmonic",
        "projective",
        "nabla_riemann",
        "nabla_ricci",
    )

    def __init__(self, geo: Geometry, points: Sequence[Binding]):
        self.geo = geo
        self.points = list(points)
        self.cols = ex.stack_bindings(self.points)
        self.size = len(self.points)
        self._cache: dict[str, Tensor | np.ndarray] = {}

    def __getattr__(self, name: str):
        if name in PointGeometry._SYMBOLIC:
            cache = self.__dict__["_cache"]
            if name not in cache:
                cache[name] = getattr(self.geo, name).evaluate(self.cols)
            return cache[name]
        raise AttributeError(name)

    @property
    def n(self) -> int:
        return self.geo.n

    @property
    def scalar(self) -> np.ndarray:
        if "scalar" not in self._cache:
            self._cache["scalar"] = evaluate_scalar(self.geo.scalar, self.cols)
        return self._cache["scalar"]

    def curvature(self, kind: str) -> Tensor:
        key = f"curv:{kind}"
        if key not in self._cache:
            self._cache[key] = self.geo.curvature(kind).evaluate(self.cols)
        return self._cache[key]

    def nabla(self, kind: str) -> Tensor:
        key = f"nabla:{kind}"
        if key not in self._cache:
            self._cache[key] = self.geo.nabla(kind).evaluate(self.cols)
        return self._cache[key]

    def ricci_power(self, k: int) -> Tensor:
        key = f"S^{k}"
        if key not in self._cache:
            self._cache[key] = ricci_power(self.ricci, self.ginv, k).renamed(key)
        return self._cache[key]

    def symbolic(self, name: str) -> Tensor:
        """Resolve ``name``: an attribute name, a curvature letter or ``nabla X``."""
        if name in PointGeometry._SYMBOLIC:
            return getattr(self.geo, name)
        if name.startswith("nabla "):
            return self.geo.nabla(name.split()[1])
        return self.geo.curvature(name)

    def magnitude(self, name: str) -> np.ndarray:
        """Per-point round-off scale of a named symbolic tensor (see :meth:`Tensor.magnitude`)."""
        key = f"mag:{name}"
        if key not in self._cache:
            self._cache[key] = self.symbolic(name).magnitude(self.cols)
        return self._cache[key]

    def evaluate(self, T: Tensor | Expr):
        if isinstance(T, Tensor):
            return T.evaluate(self.cols)
        return evaluate_scalar(T, self.cols)
