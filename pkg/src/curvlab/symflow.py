"""Lie derivatives, Killing fields, curvature inheritance, solitons and the energy-momentum tensor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .chart import MetricSpec
from .expr import Expr
from .pseudo import DEPENDENT_TOL, FitResult, dot_action, fit_combo, norm_inf, tachibana, vanishing
from .tensor import Geometry, PointGeometry, Tensor, _exprs, outer, partial


class SolitonArgumentError(ValueError):
    """An eta-type soliton ansatz was requested without a 1-form."""


# --------------------------------------------------------------------------
# vector fields


@dataclass(frozen=True)
class VectorFieldSpec:
    """Contravariant components xi^a in the chart coordinates."""

    components: tuple[Expr, ...]
    name: str = "xi"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(ex.as_expr(c) for c in self.components))

    @property
    def n(self) -> int:
        return len(self.components)

    @classmethod
    def coordinate(cls, spec: MetricSpec, coord: str) -> VectorFieldSpec:
        """The coordinate field d/d(coord)."""
        if coord not in spec.coords:
            raise ValueError(f"unknown coordinate {coord!r}")
        comps = tuple(ex.ONE if c == coord else ex.ZERO for c in spec.coords)
        return cls(comps, f"d/d{coord}")

    @classmethod
    def combination(cls, spec: MetricSpec, weights: dict[str, float]) -> VectorFieldSpec:
        """Constant-coefficient combination of coordinate fields, e.g. {"t": 2.0, "phi": -1.0}."""
        for c in weights:
            if c not in spec.coords:
                raise ValueError(f"unknown coordinate {c!r}")
        comps = tuple(ex.const(weights.get(c, 0.0)) for c in spec.coords)
        label = " + ".join(f"{w:g} d/d{c}" for c, w in weights.items())
        return cls(comps, label)

    @classmethod
    def parse(cls, spec: MetricSpec, texts: Sequence[str], name: str = "xi") -> VectorFieldSpec:
        if len(texts) != spec.n:
            raise ValueError(f"vector field needs {spec.n} components, got {len(texts)}")
        return cls(tuple(spec.parse(t) for t in texts), name)


def parse_one_form(spec: MetricSpec, texts: Sequence[str], name: str = "eta") -> Tensor:
    if len(texts) != spec.n:
        raise ValueError(f"1-form needs {spec.n} components, got {len(texts)}")
    return Tensor(np.array([spec.parse(t) for t in texts], dtype=object), "d", name)


def one_form(components: Sequence, name: str = "eta") -> Tensor:
    return Tensor(np.array([ex.as_expr(c) for c in components], dtype=object), "d", name)


# --------------------------------------------------------------------------
# Lie derivative


def lie_derivative(T: Tensor, xi: VectorFieldSpec, coords: Sequence[str]) -> Tensor:
    """Coordinate formula for the Lie derivative of a symbolic tensor.

    (L_xi T) = xi^c d_c T + sum over lower slots T_{..c..} d_slot xi^c
    - sum over upper slots T^{..c..} d_c xi^slot.
    """
    if not T.symbolic:
        raise ValueError("lie_derivative needs a symbolic tensor")
    if T.positions not in ("dd", "dddd", "uddd", "d", "u"):
        raise ValueError(f"unsupported valence {T.positions!r}")
    n = len(coords)
    if xi.n != n or T.n != n:
        raise ValueError("dimension mismatch between tensor, field and chart")
    xv = Tensor(np.array(xi.components, dtype=object), "u")
    dxi = partial(xv, coords)  # dxi[e, c] = d_c xi^e
    dT = partial(T, coords)
    out = np.empty(T.data.shape, dtype=object)
    k = T.rank
    for idx in np.ndindex(T.data.shape):
        terms = [ex.mul(xi.components[c], dT[idx + (c,)]) for c in range(n)]
        for s in range(k):
            for c in range(n):
                swapped = idx[:s] + (c,) + idx[s + 1 :]
                if T.positions[s] == "d":
                    terms.append(ex.mul(T.data[swapped], dxi[c, idx[s]]))
                else:
                    terms.append(ex.neg(ex.mul(T.data[swapped], dxi[idx[s], c])))
        out[idx] = ex.add(*terms)
    return Tensor(out, T.positions, f"L_{xi.name} {T.name}")


class FlowGeometry:
    """Symbolic Lie derivatives of the curvature tower along one field, with caching."""

    def __init__(self, geo: Geometry, xi: VectorFieldSpec):
        self.geo = geo
        self.xi = xi
        store = geo.__dict__.setdefault("_lie_cache", {})
        self._cache: dict[str, Tensor] = store.setdefault(xi.components, {})

    def lie(self, what: str) -> Tensor:
        """``what`` is one of g, S, R04, R13."""
        if what not in self._cache:
            src = {"g": self.geo.g, "S": self.geo.ricci, "R04": self.geo.riemann, "R13": self.geo.riemann13}
            if what not in src:
                raise ValueError(f"unknown tensor {what!r}")
            self._cache[what] = lie_derivative(src[what], self.xi, self.geo.coords)
        return self._cache[what]


def _lie_at(geo: Geometry, xi: VectorFieldSpec, what: str, pg: PointGeometry) -> tuple[Tensor, np.ndarray]:
    sym = FlowGeometry(geo, xi).lie(what)
    return sym.evaluate(pg.cols), sym.magnitude(pg.cols)


# --------------------------------------------------------------------------
# Killing, collineation, inheritance


def killing_check(xi: VectorFieldSpec, pg: PointGeometry, tol: float = DEPENDENT_TOL) -> FitResult:
    """Residual of L_xi g = 0, relative to the round-off scale of L_xi g and of g."""
    val, mag = _lie_at(pg.geo, xi, "g", pg)
    scale = np.maximum(mag, pg.magnitude("g"))
    res = vanishing(val, scale=scale, tol=tol)
    return FitResult(res.coefficients, res.residuals, res.ranks, (), tol, note=f"L_{xi.name} g = 0")


_INHERIT_SOURCE = {"S": "ricci", "R04": "riemann", "R13": "riemann13"}


def inheritance_fit(
    kind: str,
    xi: VectorFieldSpec,
    pg: PointGeometry,
    generalized: bool = False,
    collineation: bool = False,
    tol: float = DEPENDENT_TOL,
) -> FitResult:
    """Fit L_xi T = lambda T (plain) or against {R, g^g, g^S, S^S} (generalized, R04 only).

    With ``collineation`` the coefficient is forced to zero and the result
    is the residual of L_xi T = 0.
    """
    if kind not in _INHERIT_SOURCE:
        raise ValueError(f"unknown inheritance kind {kind!r}")
    if generalized and kind != "R04":
        raise ValueError("generalized inheritance is defined for the (0,4) curvature only")
    lhs, mag = _lie_at(pg.geo, xi, kind, pg)
    T = getattr(pg, _INHERIT_SOURCE[kind])
    scale = np.maximum(mag, 1e-300)
    if collineation:
        res = vanishing(lhs, scale=scale, tol=tol)
        return FitResult(res.coefficients, res.residuals, res.ranks, (), tol, note=f"L_{xi.name} {kind} = 0")
    if generalized:
        basis = [T, pg.gg, pg.gS, pg.SS]
        labels = ("lambda", "lambda1", "lambda2", "lambda3")
    else:
        basis = [T]
        labels = ("lambda",)
    fit = fit_combo(lhs, basis, scale=scale, labels=labels, tol=tol)
    return FitResult(
        fit.coefficients, fit.residuals, fit.ranks, labels, tol, note=f"L_{xi.name} {kind} inheritance"
    )


# --------------------------------------------------------------------------
# solitons

SOLITON_KINDS = ("ricci", "eta_ricci", "ricci_yamabe", "eta_ricci_yamabe")


@dataclass(frozen=True)
class SolitonFit:
    """Per-point soliton scalars.

    Equations, with all scalars free per point:

    * ``ricci``:            1/2 L g + S - mu g = 0
    * ``eta_ricci``:        1/2 L g + S + sigma2 g - sigma3 eta(x)eta = 0
    * ``ricci_yamabe``:     L g + 2 sigma1 S + 2 sigma2 g = 0
    * ``eta_ricci_yamabe``: L g + 2 sigma1 S + 2 sigma2 g - 2 sigma3 eta(x)eta = 0
    """

    kind: str
    labels: tuple[str, ...]
    coefficients: np.ndarray
    fit: FitResult
    eta: tuple[str, ...] | None = None
    continuity: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def residuals(self) -> np.ndarray:
        return self.fit.residuals

    @property
    def max_residual(self) -> float:
        return self.fit.max_residual

    def coefficient(self, label: str) -> np.ndarray:
        return self.coefficients[:, self.labels.index(label)]

    @property
    def admits(self) -> bool:
        """Residual passes everywhere and the fitted scalars vary continuously."""
        return self.fit.holds and self.continuity <= 1e-3

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "labels": list(self.labels),
            "coefficients": self.coefficients.tolist(),
            "residuals": self.fit.residuals.tolist(),
            "verdict": "holds" if self.admits else ("fails" if self.fit.verdict == "independent" else "inconclusive"),
            "continuity": self.continuity,
            "eta": list(self.eta) if self.eta else None,
        }


def _soliton_system(kind: str, Lg: Tensor, S: Tensor, g: Tensor, ee: Tensor | None):
    """Return (lhs, basis, labels, map from raw coefficients to reported scalars)."""
    if kind == "ricci":
        return Lg * 0.5 + S, [g], ("mu",), lambda c: c
    if kind == "eta_ricci":
        return Lg * 0.5 + S, [g, ee], ("sigma2", "sigma3"), lambda c: np.stack([-c[:, 0], c[:, 1]], axis=1)
    if kind == "ricci_yamabe":
        return Lg, [S, g], ("sigma1", "sigma2"), lambda c: -0.5 * c
    if kind == "eta_ricci_yamabe":
        return (
            Lg,
            [S, g, ee],
            ("sigma1", "sigma2", "sigma3"),
            lambda c: np.stack([-0.5 * c[:, 0], -0.5 * c[:, 1], 0.5 * c[:, 2]], axis=1),
        )
    raise ValueError(f"unknown soliton kind {kind!r}; choose from {SOLITON_KINDS}")


def _soliton_raw(kind, geo, xi, eta, pg, tol):
    Lg_sym = FlowGeometry(geo, xi).lie("g")
    Lg = Lg_sym.evaluate(pg.cols)
    ee = None
    if eta is not None:
        ee = pg.evaluate(outer(eta, eta))
    lhs, basis, labels, conv = _soliton_system(kind, Lg, pg.ricci, pg.g, ee)
    scale = np.maximum(Lg_sym.magnitude(pg.cols), pg.magnitude("ricci"))
    fit = fit_combo(lhs, basis, scale=scale, labels=labels, tol=tol)
    return fit, labels, conv(fit.coefficients)


def soliton_fit(
    kind: str,
    xi: VectorFieldSpec,
    pg: PointGeometry,
    eta: Tensor | None = None,
    tol: float = DEPENDENT_TOL,
    probe: float = 1e-6,
) -> SolitonFit:
    """Least-squares soliton scalars at each sample point.

    ``continuity`` is the largest relative change of the fitted scalars when
    every coordinate is shifted by ``probe``; a genuine coefficient function
    changes by O(probe) while a fit to noise jumps.
    """
    if kind not in SOLITON_KINDS:
        raise ValueError(f"unknown soliton kind {kind!r}; choose from {SOLITON_KINDS}")
    if kind.startswith("eta") and eta is None:
        raise SolitonArgumentError(f"{kind} needs a 1-form eta")
    geo = pg.geo
    fit, labels, coef = _soliton_raw(kind, geo, xi, eta, pg, tol)
    shifted = [b.with_coords(**{c: v + probe for c, v in b.coords.items()}) for b in pg.points]
    try:
        _, _, coef2 = _soliton_raw(kind, geo, xi, eta, geo.at(shifted), tol)
        denom = np.maximum(np.abs(coef), 1.0)
        continuity = float(np.max(np.abs(coef2 - coef) / denom)) if coef.size else 0.0
    except ex.SingularEvaluation:
        continuity = float("inf")
    fit = FitResult(coef, fit.residuals, fit.ranks, labels, tol, note=kind)
    extra = {}
    if kind == "eta_ricci_yamabe":
        # the eta-Ricci ansatz is the sigma1 = 1 slice of this one
        extra["sigma1_is_one"] = (np.abs(coef[:, 0] - 1.0) <= 1e-6).tolist()
    eta_txt = tuple(ex.to_string(c) for c in eta.data) if eta is not None else None
    return SolitonFit(kind, labels, coef, fit, eta_txt, continuity, extra)


# --------------------------------------------------------------------------
# energy-momentum tensor


@dataclass(frozen=True)
class EMTensor:
    tensor: Tensor
    Lambda: float = 0.0
    nu: float = 8.0


def energy_momentum(geo: Geometry, Lambda: float = 0.0, nu: float = 8.0) -> EMTensor:
    """T = (S - kappa/2 g + Lambda g) / nu, symbolic."""
    if nu == 0:
        raise ValueError("coupling nu must be nonzero")
    g, S = geo.g.data, geo.ricci.data
    coef_g = ex.add(ex.mul(ex.const(ex.Fraction(-1, 2)), geo.scalar), ex.const(Lambda))
    inv_nu = ex.div(ex.ONE, ex.const(nu))
    data = np.empty(g.shape, dtype=object)
    for idx in np.ndindex(g.shape):
        data[idx] = ex.mul(inv_nu, ex.add(S[idx], ex.mul(coef_g, g[idx])))
    return EMTensor(Tensor(_exprs(data), "dd", "T", ("sym(1,2)",)), Lambda, nu)


def em_pseudosymmetry_suite(
    pg: PointGeometry, Lambda: float = 0.0, nu: float = 8.0, tol: float = DEPENDENT_TOL
) -> dict[str, FitResult]:
    """X.T against Q(g,T) for X in R, C, W, K, and compatibility of T with R, C, K, W, P."""
    from .classify import compatibility_order, compatibility_residual

    em = energy_momentum(pg.geo, Lambda, nu)
    Tsym = em.tensor
    T = pg.evaluate(Tsym)
    Tmag = Tsym.magnitude(pg.cols)
    QgT = tachibana(pg.g, T)
    gi = norm_inf(pg.ginv)
    out: dict[str, FitResult] = {}
    for kind in "RCWK":
        X = pg.curvature(kind)
        lhs = dot_action(X, T, pg.ginv)
        scale = gi * pg.magnitude(kind) * Tmag
        out[f"{kind}.T"] = fit_combo(lhs, [QgT], scale=scale, labels=(f"L_{kind}",), tol=tol)
    for kind in "RCKWP":
        out[f"T compatible {kind}"] = compatibility_residual(
            compatibility_order(pg.curvature(kind)), T, pg.ginv, scale=gi * pg.magnitude(kind) * Tmag, tol=tol
        )
    return out

