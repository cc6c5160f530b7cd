"""Registry of named Hayward identities, negative controls and comparison claims.

Each check evaluates one or more *parts* at sampled points:

* ``holds`` parts pass when every residual is at most ``tol`` and every fitted
  coefficient matches its closed form to ``coef_tol`` (relative);
* ``fails`` parts are negative controls and pass when the residual is at least
  ``INDEPENDENT_TOL`` at ``NEGATIVE_FRACTION`` of the points or more;
* ``flag`` parts carry a boolean computed by the check itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import symflow as sf
from .chart import SamplePlan, builtin_metric, point, sample_points
from .classify import (
    BLOCK_PATTERN,
    ClosedForm,
    _Ctx,
    compatibility_order,
    compatibility_residual,
    compatible_space,
    einstein_level,
    gqe_verify,
    generalized_roter_fit,
    quasi_einstein,
    rank_gap,
    recurrence_fit,
    ricci_derivative_flags,
    roter_fit,
    two_form_recurrence,
    venzi_gap,
    weak_symmetry_fit,
)
from .pseudo import DEPENDENT_TOL, INDEPENDENT_TOL, FitResult, fit_combo, norm_inf, vanishing
from .tensor import Geometry, PointGeometry, Tensor

NEGATIVE_FRACTION = 0.9
COEF_TOL = 1e-8

_ABBREV = {
    "B": "(r^3 - 2*m*r^2 + 2*b^2*m)",
    "B1": "(r^3 + 2*b^2*m)",
    "B2": "(4*b^2*m - r^3)",
    "B3": "(b^2*m - r^3)",
    "B4": "(10*b^2*m - r^3)",
}


def hayward_form(text: str) -> str:
    """Expand the shorthands B, B1..B4 of the Hayward blackening factor."""
    return re.sub(r"\bB[1-4]?\b", lambda mt: _ABBREV[mt.group(0)], text)


L_R = hayward_form("-m*B2/B1^2")
L_C = hayward_form("-m*r^3*B2/B1^3")
L_K = hayward_form("m*B2^2/B1^3")
L_MIXED = hayward_form("m*(16*b^2*m - r^3)/(B2*B1)")
L1_MIXED = hayward_form("-8*b^2*m^2*B2/((16*b^2*m - r^3)*B1^2)")
L2_MIXED = hayward_form("(16*b^4*m^2 - 8*b^2*m*r^3 + r^6)/((r^3 - 16*b^2*m)*B1)")
L3_MIXED = hayward_form("8*b^2*m^2*B2/B1^3")
PSI1 = hayward_form("12*b^2*m^2*B2/B1^3")
PSI2 = hayward_form("288*b^4*m^4*B3/B1^5")
ALPHA = hayward_form("-12*b^2*m^2/B1^2")
GQE_PI = (hayward_form("-B/B1"), "1", "0", "0")
GQE_PHI = (
    hayward_form("(36*b^2*m^2*r^3 + B1^2*B)/(2*B1^3)"),
    hayward_form("18*b^2*m^2*r^3/(B1^2*B) - 1/2"),
    "0",
    "0",
)
# the cyclic recurrence 1-form of C; the sign is fixed by direct computation
SIGMA2 = "6*b^2*m*(8*b^2*m - 5*r^3)/(8*b^4*m^2*r + 2*b^2*m*r^4 - r^7)"
SOLITON_SIGMA = {
    "sigma1": hayward_form("B1^2*(4*b^4*m^2 + 4*b^2*m*r^3 - 3*m*r^5 + r^6)/(36*b^2*m^2*r^4*B)"),
    "sigma2": hayward_form("(4*b^4*m^2 - 2*b^2*m*r^3 + 3*m*r^5 - 2*r^6)/(3*r^4*B)"),
    "sigma3": hayward_form("2*m*r*B2/B^2"),
}
# r^3 = 16 b^2 m is a pole of L1, L2 above
MIXED_POLE_GUARD = "r^3 - 16*b^2*m"


def _pseudo_row(x: str, h: str) -> str:
    return f"{x}.{h} = L Q(g,{h})"


# closed forms for rows of the Hayward classification report
KNOWN_FORMS: dict[str, ClosedForm] = {}
for _x, _cf in (("R", L_R), ("C", L_C), ("W", L_C), ("K", L_K)):
    for _h in ("R", "S", "C", "P", "W", "K"):
        KNOWN_FORMS[_pseudo_row(_x, _h)] = ClosedForm(_cf)
    if _x != "P":
        KNOWN_FORMS[f"energy-momentum {_x}.T = L Q(g,T)"] = ClosedForm(_cf)
KNOWN_FORMS["P.S = L Q(g,S)"] = ClosedForm(L_R)
KNOWN_FORMS["R.R - L Q(g,C) = Q(S,R)"] = ClosedForm(L_MIXED)
KNOWN_FORMS["einstein_level"] = ClosedForm(PSI1, "theta1")
KNOWN_FORMS["2_quasi_einstein"] = ClosedForm(ALPHA, "alpha")
KNOWN_FORMS["C 2-forms recurrent"] = ClosedForm(SIGMA2, "Sigma2")
KNOWN_FORMS["almost eta-ricci-yamabe soliton d/dr"] = ClosedForm(SOLITON_SIGMA["sigma1"], "sigma1")


# --------------------------------------------------------------------------
# outcomes


@dataclass
class CoefficientCheck:
    label: str
    closed_form: str
    fitted: np.ndarray
    expected: np.ndarray

    @property
    def errors(self) -> np.ndarray:
        den = np.maximum(np.abs(self.expected), 1e-300)
        return np.abs(self.fitted - self.expected) / den

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if self.errors.size else 0.0


@dataclass
class Part:
    name: str
    expect: str  # holds | fails | flag
    residuals: np.ndarray | None = None
    flag: bool | None = None
    coefficients: list[CoefficientCheck] = field(default_factory=list)
    note: str = ""

    def passed(self, tol: float, coef_tol: float = COEF_TOL) -> bool:
        if self.expect == "flag":
            return bool(self.flag)
        res = np.asarray(self.residuals)
        if self.expect == "fails":
            return bool(res.size) and float(np.mean(res >= INDEPENDENT_TOL)) >= NEGATIVE_FRACTION
        ok = bool(np.all(res <= tol))
        return ok and all(c.max_error <= coef_tol for c in self.coefficients)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals is not None and np.size(self.residuals) else 0.0

    @property
    def fraction_independent(self) -> float:
        if self.residuals is None or not np.size(self.residuals):
            return 0.0
        return float(np.mean(np.asarray(self.residuals) >= INDEPENDENT_TOL))


@dataclass
class Outcome:
    id: str
    statement: str
    metric: str
    parts: list[Part]
    tol: float
    coef_tol: float = COEF_TOL
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and all(p.passed(self.tol, self.coef_tol) for p in self.parts)

    def lines(self, per_point: bool = True) -> list[str]:
        out = [f"{self.id}: {self.statement} [{self.metric}]"]
        if self.error:
            out.append(f"  error: {self.error}")
        for p in self.parts:
            status = "ok" if p.passed(self.tol, self.coef_tol) else "FAIL"
            if p.expect == "flag":
                out.append(f"  [{status}] {p.name}: {p.note}")
                continue
            what = "expect residual >= %.0e" % INDEPENDENT_TOL if p.expect == "fails" else "expect residual <= %.0e" % self.tol
            out.append(
                f"  [{status}] {p.name}: max residual {p.max_residual:.3e}, "
                f"independent at {p.fraction_independent:.0%} of points ({what})"
            )
            if p.note:
                out.append(f"      {p.note}")
            for c in p.coefficients:
                out.append(f"      {c.label} vs {c.closed_form}: max relative error {c.max_error:.2e}")
                if per_point:
                    out.append(f"        {'point':>5} {'fitted':>22} {'closed form':>22} {'rel err':>10}")
                    for i, (f, e, r) in enumerate(zip(c.fitted, c.expected, c.errors)):
                        out.append(f"        {i:>5} {f:>22.15g} {e:>22.15g} {r:>10.2e}")
        out.append(f"{'PASS' if self.passed else 'FAIL'} {self.id}")
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "statement": self.statement,
            "metric": self.metric,
            "passed": self.passed,
            "error": self.error,
            "parts": [
                {
                    "name": p.name,
                    "expect": p.expect,
                    "passed": p.passed(self.tol, self.coef_tol),
                    "max_residual": p.max_residual,
                    "fraction_independent": p.fraction_independent,
                    "note": p.note,
                    "coefficients": [
                        {
                            "label": c.label,
                            "closed_form": c.closed_form,
                            "fitted": c.fitted.tolist(),
                            "expected": c.expected.tolist(),
                            "max_error": c.max_error,
                        }
                        for c in p.coefficients
                    ],
                }
                for p in self.parts
            ],
        }


# --------------------------------------------------------------------------
# context


class VerifyContext:
    """Sampled geometries shared by the checks of one run.

    ``params`` apply to the Hayward metric; other catalog metrics use their
    defaults.
    """

    def __init__(self, plan: SamplePlan | None = None, tol: float = DEPENDENT_TOL, params: dict | None = None,
                 Lambda: float = 0.0, nu: float = 8.0):
        self.plan = plan or SamplePlan()
        self.tol = tol
        self.params = dict(params or {})
        self.Lambda = Lambda
        self.nu = nu
        self._cache: dict = {}

    def spec(self, metric: str = "hayward"):
        return builtin_metric(metric, self.params if metric == "hayward" else None)

    def pg(self, metric: str = "hayward", guards: tuple[str, ...] = ()) -> PointGeometry:
        key = ("pg", metric, guards)
        if key not in self._cache:
            spec = self.spec(metric)
            plan = self.plan
            if guards:
                plan = SamplePlan(
                    seed=plan.seed, count=plan.count, ranges=plan.ranges,
                    guards=tuple(plan.guards) + tuple(spec.parse(gd) for gd in guards),
                    guard_tol=max(plan.guard_tol, 1e-3), max_draws=plan.max_draws,
                )
            self._cache[key] = Geometry(spec).at(sample_points(spec, plan))
        return self._cache[key]

    def cx(self, metric: str = "hayward", guards: tuple[str, ...] = ()) -> _Ctx:
        key = ("cx", metric, guards)
        if key not in self._cache:
            self._cache[key] = _Ctx(self.pg(metric, guards))
        return self._cache[key]

    def closed(self, pg: PointGeometry, text: str) -> np.ndarray:
        return np.asarray(pg.evaluate(pg.geo.spec.parse(text)), dtype=float) * np.ones(pg.size)


def _coef(pg: PointGeometry, ctx: VerifyContext, label: str, fitted, text: str) -> CoefficientCheck:
    return CoefficientCheck(label, text, np.asarray(fitted, dtype=float), ctx.closed(pg, text))


def _fit_part(name: str, fit: FitResult, expect: str = "holds", coefs: list[CoefficientCheck] | None = None,
              note: str = "", metric: str = "hayward") -> Part:
    return Part(_named(name, metric), expect, fit.residuals, coefficients=coefs or [], note=note)


def _named(name: str, metric: str) -> str:
    return name if metric == "hayward" else f"{metric}: {name}"


# --------------------------------------------------------------------------
# part builders


def _pseudo(ctx: VerifyContext, x: str, h: str, closed: str | None, expect: str = "holds",
            metric: str = "hayward") -> Part:
    cx = ctx.cx(metric)
    fit = fit_combo(
        cx.dot(x, h), [cx.q("g", h)], scale=cx.dot_scale(x, h), labels=(f"L_{x}",), tol=ctx.tol,
        basis_scale=[norm_inf(cx.pg.g) * cx.mag(h)],
    )
    coefs = [_coef(cx.pg, ctx, f"L_{x}", fit.coefficients[:, 0], closed)] if closed and expect == "holds" else []
    return _fit_part(f"{x}.{h} = L Q(g,{h})", fit, expect, coefs, metric=metric)


def _semisym(ctx: VerifyContext, h: str) -> Part:
    cx = ctx.cx()
    fit = vanishing(cx.dot("R", h), scale=cx.dot_scale("R", h), tol=ctx.tol)
    return _fit_part(f"R.{h} = 0", fit, "fails")


def _mixed(ctx: VerifyContext, metric: str = "hayward", closed: bool = True) -> Part:
    cx = ctx.cx(metric)
    lhs = cx.dot("R", "R") - cx.q("S", "R")
    fit = fit_combo(lhs, [cx.q("g", "C")], scale=cx.dot_scale("R", "R") + cx.mag("S") * cx.mag("R"),
                    labels=("L",), tol=ctx.tol)
    coefs = [_coef(cx.pg, ctx, "L", fit.coefficients[:, 0], L_MIXED)] if closed else []
    return _fit_part("R.R - L Q(g,C) = Q(S,R)", fit, "holds", coefs)


def _commutator(ctx: VerifyContext, pair: str | None) -> Part:
    """C.R - R.C against the Q-tensors; ``pair`` selects the two-term forms."""
    guards = (MIXED_POLE_GUARD,) if pair == "R" else ()
    cx = ctx.cx("hayward", guards)
    lhs = cx.dot("C", "R") - cx.dot("R", "C")
    scale = cx.dot_scale("C", "R") + cx.dot_scale("R", "C")
    if pair is None:
        basis = [cx.q("g", "C"), cx.q("S", "C"), cx.q("g", "R"), cx.q("S", "R")]
        fit = fit_combo(lhs, basis, scale=scale, labels=("L1", "L2", "L3", "L4"), tol=ctx.tol)
        return _fit_part("C.R - R.C in span Q(g,C), Q(S,C), Q(g,R), Q(S,R)", fit)
    basis = [cx.q("g", pair), cx.q("S", pair)]
    fit = fit_combo(lhs, basis, scale=scale, labels=("a", "b"), tol=ctx.tol)
    if pair == "R":
        forms = (("L1", L1_MIXED), ("L2", L2_MIXED))
        note = "points with r^3 = 16 b^2 m excluded (pole of L1, L2)"
    else:
        forms = (("L3", L3_MIXED), ("L4", "1"))
        note = ""
    coefs = [_coef(cx.pg, ctx, lab, fit.coefficients[:, j], text) for j, (lab, text) in enumerate(forms)]
    return _fit_part(f"C.R - R.C = a Q(g,{pair}) + b Q(S,{pair})", fit, "holds", coefs, note)


def _compat_space(ctx: VerifyContext, x: str) -> Part:
    pg = ctx.pg()
    T = compatibility_order(pg.curvature(x))
    space = compatible_space(T, pg.ginv, scale=norm_inf(pg.ginv) * pg.magnitude(x))
    dims = space.dims
    block = all(
        B.shape[0] == 0 or np.array_equal(np.abs(B).max(axis=0) > 1e-9, BLOCK_PATTERN) for B in space.bases
    )
    ok = bool(np.all(dims == 6)) and block
    note = f"dimensions {sorted(set(int(d) for d in dims))}, block support at every point: {block}"
    return Part(f"{x}-compatible tensors", "flag", flag=ok, note=note)


def _ricci_compat(ctx: VerifyContext, x: str, metric: str = "hayward") -> Part:
    pg = ctx.pg(metric)
    T = compatibility_order(pg.curvature(x))
    fit = compatibility_residual(T, pg.ricci, pg.ginv, scale=norm_inf(pg.ginv) * pg.magnitude(x)
                                 * pg.magnitude("ricci"), tol=ctx.tol)
    return _fit_part(f"S is {x}-compatible", fit, metric=metric)


def _em_part(ctx: VerifyContext, key: str, closed: str | None) -> Part:
    key_cache = ("em",)
    if key_cache not in ctx._cache:
        ctx._cache[key_cache] = sf.em_pseudosymmetry_suite(ctx.pg(), ctx.Lambda, ctx.nu, ctx.tol)
    fit = ctx._cache[key_cache][key]
    coefs = [_coef(ctx.pg(), ctx, fit.labels[0], fit.coefficients[:, 0], closed)] if closed else []
    return _fit_part(f"energy-momentum {key}", fit, "holds", coefs)


def _two_forms(ctx: VerifyContext, x: str, expect: str, metric: str = "hayward", closed: bool = False) -> Part:
    pg = ctx.pg(metric)
    fit = two_form_recurrence(pg.curvature(x), pg.nabla(x), scale=pg.magnitude(f"nabla {x}"), tol=ctx.tol,
                              tensor_scale=pg.magnitude(x))
    coefs = []
    if closed:
        coefs = [_coef(pg, ctx, "Sigma2", fit.coefficients[:, 1], SIGMA2)]
        for j in (0, 2, 3):
            sig = np.abs(fit.coefficients[:, j])
            coefs.append(CoefficientCheck(f"Sigma{j + 1}", "0", sig, np.zeros_like(sig)))
    part = _fit_part(f"{x} 2-forms recurrent", fit, expect, [c for c in coefs if c.closed_form != "0"], metric=metric)
    if closed:
        # vanishing components: absolute test against the size of Sigma2
        zero = max(c.fitted.max() for c in coefs if c.closed_form == "0")
        ref = float(np.max(np.abs(coefs[0].expected)))
        part.note = f"other components of Sigma at most {zero:.2e} (|Sigma2| up to {ref:.2e})"
        if zero > COEF_TOL * max(ref, 1.0):
            part.residuals = np.maximum(part.residuals, 1.0)
    return part


def _derivative_fit(ctx: VerifyContext, x: str, what: str, metric: str = "hayward") -> Part:
    pg = ctx.pg(metric)
    T, DT = pg.curvature(x), pg.nabla(x)
    mT, mD = pg.magnitude(x), pg.magnitude(f"nabla {x}")
    if what == "parallel":
        return _fit_part(f"nabla {x} = 0", vanishing(DT, scale=mD, tol=ctx.tol), "fails")
    if what == "recurrent":
        return _fit_part(f"{x} recurrent", recurrence_fit(T, DT, scale=mD, tol=ctx.tol, tensor_scale=mT), "fails")
    if what == "weak":
        fit = weak_symmetry_fit(T, DT, scale=mD, tol=ctx.tol, tensor_scale=mT)
        return _fit_part(f"weakly {x}-symmetric", fit, "fails")
    if what == "chaki":
        fit = weak_symmetry_fit(T, DT, scale=mD, chaki=True, tol=ctx.tol, tensor_scale=mT)
        return _fit_part(f"chaki {x}-pseudosymmetric", fit, "fails")
    if what == "venzi":
        return Part(f"{x}-space by Venzi", "fails", venzi_gap(T, scale=mT),
                    note="residual is sigma_min/sigma_max of the Venzi map")
    raise ValueError(what)


def _inheritance_parts(ctx: VerifyContext, metric: str, xi: sf.VectorFieldSpec, kinds, expect: str) -> list[Part]:
    pg = ctx.pg(metric)
    parts = []
    for kind, label, collineation, generalized in kinds:
        fit = sf.inheritance_fit(kind, xi, pg, generalized=generalized, collineation=collineation, tol=ctx.tol)
        parts.append(_fit_part(f"{label} along {xi.name}", fit, expect, metric=metric))
    return parts


_INHERIT_ALL = (
    ("S", "Ricci collineation", True, False),
    ("S", "Ricci inheritance", False, False),
    ("R13", "(1,3) curvature collineation", True, False),
    ("R13", "(1,3) curvature inheritance", False, False),
    ("R04", "(0,4) curvature collineation", True, False),
    ("R04", "(0,4) curvature inheritance", False, False),
    ("R04", "generalized (0,4) curvature inheritance", False, True),
)


def _xi(ctx: VerifyContext, metric: str, which: str) -> sf.VectorFieldSpec:
    spec = ctx.spec(metric)
    if which == "combo_rtheta":
        xi = sf.VectorFieldSpec.combination(spec, {"r": 0.7, "theta": -1.3})
        return sf.VectorFieldSpec(xi.components, "0.7 d/dr - 1.3 d/dtheta")
    if which == "combo_tphi":
        xi = sf.VectorFieldSpec.combination(spec, {"t": 1.5, "phi": -0.4})
        return sf.VectorFieldSpec(xi.components, "1.5 d/dt - 0.4 d/dphi")
    return sf.VectorFieldSpec.coordinate(spec, which)


def _killing(ctx: VerifyContext, metric: str, which: str, expect: str) -> Part:
    xi = _xi(ctx, metric, which)
    fit = sf.killing_check(xi, ctx.pg(metric), tol=ctx.tol)
    return _fit_part(f"{xi.name} is Killing", fit, expect, metric=metric)


def _eta_dr(spec):
    return sf.one_form([1 if k == 1 else 0 for k in range(spec.n)])


def _soliton(ctx: VerifyContext, metric: str, kind: str, expect: str, closed: bool = False) -> Part:
    pg = ctx.pg(metric)
    xi = sf.VectorFieldSpec.coordinate(pg.geo.spec, "r")
    fit = sf.soliton_fit(kind, xi, pg, eta=_eta_dr(pg.geo.spec), tol=ctx.tol)
    coefs = []
    if closed:
        coefs = [_coef(pg, ctx, lab, fit.coefficient(lab), SOLITON_SIGMA[lab]) for lab in fit.labels]
    residuals = fit.residuals
    first = ", ".join(f"{lab}={fit.coefficients[0, j]:.6g}" for j, lab in enumerate(fit.labels))
    note = f"fitted at the first point: {first}; coefficient continuity probe {fit.continuity:.2e}"
    if expect == "holds" and not fit.admits:
        residuals = np.maximum(residuals, 1.0)
    return Part(_named(f"almost {kind.replace('_', '-')} soliton along d/dr with eta = dr", metric), expect, residuals,
                coefficients=coefs, note=note)


def _soliton_locus_points(ctx: VerifyContext):
    """Sample points on r-roots of sigma1 = 1 (the eta-Ricci slice)."""
    spec = ctx.spec("hayward")
    pv = spec.param_values()
    m, b = pv["m"], pv["b"]
    bm = b * b * m
    # B1^2 (4 b^4 m^2 + 4 b^2 m r^3 - 3 m r^5 + r^6) - 36 b^2 m^2 r^4 B = 0, as a polynomial in r
    B1 = np.polynomial.Polynomial([2 * bm, 0, 0, 1])
    Bp = np.polynomial.Polynomial([2 * bm, 0, -2 * m, 1])
    inner = np.polynomial.Polynomial([4 * bm * bm, 0, 0, 4 * bm, 0, -3 * m, 1])
    poly = B1 * B1 * inner - 36 * bm * m * np.polynomial.Polynomial([0, 0, 0, 0, 1]) * Bp
    roots = [float(z.real) for z in poly.roots() if abs(z.imag) < 1e-9 and z.real > 0]
    roots = [rv for rv in roots if abs(Bp(rv)) > 1e-6 and abs(B1(rv)) > 1e-6]
    rng = np.random.default_rng(ctx.plan.seed)
    pts = []
    for rv in sorted(roots):
        for _ in range(max(1, ctx.plan.count // max(len(roots), 1))):
            pts.append(point(spec, t=rng.uniform(-10, 10), r=rv, theta=rng.uniform(0.1, np.pi - 0.1),
                             phi=rng.uniform(0, 2 * np.pi)))
    return spec, roots, pts


def _eta_ricci_locus(ctx: VerifyContext) -> Part:
    spec, roots, pts = _soliton_locus_points(ctx)
    if not pts:
        return Part("almost eta-Ricci soliton on the sigma1 = 1 locus", "flag", flag=False,
                    note="no admissible radius for these parameters")
    pg = Geometry(spec).at(pts)
    xi = sf.VectorFieldSpec.coordinate(spec, "r")
    fit = sf.soliton_fit("eta_ricci", xi, pg, eta=_eta_dr(spec), tol=ctx.tol)
    coefs = [_coef(pg, ctx, lab, fit.coefficient(lab), SOLITON_SIGMA[lab]) for lab in ("sigma2", "sigma3")]
    roots_txt = ", ".join(f"{rv:.12g}" for rv in roots)
    return Part("almost eta-Ricci soliton on the sigma1 = 1 locus", "holds", fit.residuals, coefficients=coefs,
                note=f"radii solving the locus condition: {roots_txt}")


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class Proposition:
    id: str
    statement: str
    metric: str
    build: Callable[[VerifyContext], list[Part]]


REGISTRY: dict[str, Proposition] = {}


def _register(pid: str, statement: str, metric: str = "hayward"):
    def deco(fn: Callable[[VerifyContext], list[Part]]):
        if pid in REGISTRY:
            raise ValueError(f"duplicate proposition id {pid}")
        REGISTRY[pid] = Proposition(pid, statement, metric, fn)
        return fn

    return deco


_TARGETS = ("R", "S", "C", "P", "W", "K")


def _family(actor: str, closed: str) -> Callable[[VerifyContext], list[Part]]:
    return lambda ctx: [_pseudo(ctx, actor, h, closed) for h in _TARGETS]


def _quasi_einstein_part(ctx: VerifyContext) -> Part:
    pg = ctx.pg()
    qe = quasi_einstein(pg)
    coefs = [_coef(pg, ctx, "alpha", qe.alphas, ALPHA)]
    res = np.where(qe.ranks == 2, 0.0, 1.0)
    return Part("rank(S - alpha g) = 2", "holds", res, coefficients=coefs,
                note=f"ranks {sorted(set(int(r) for r in qe.ranks))}")


def _gqe_part(ctx: VerifyContext) -> Part:
    pg = ctx.pg()
    fit = gqe_verify(pg, ALPHA, 1, 1, GQE_PI, GQE_PHI, tol=ctx.tol)
    return _fit_part("S = alpha g + beta Pi(x)Pi + gamma (Pi(x)phi + phi(x)Pi)", fit)


def _ein2_part(ctx: VerifyContext) -> Part:
    pg = ctx.pg()
    el = einstein_level(pg, tol=ctx.tol)
    fit = el.fits[2] if 2 in el.fits else el.fits[max(el.fits)]
    coefs = []
    if fit.coefficients.shape[1] == 2:
        coefs = [_coef(pg, ctx, "theta1", fit.coefficients[:, 0], PSI1),
                 _coef(pg, ctx, "theta2", fit.coefficients[:, 1], PSI2)]
    res = fit.residuals if el.level == 2 else np.maximum(fit.residuals, 1.0)
    return Part("S^2 + theta1 S + theta2 g = 0 (level 2)", "holds", res, coefficients=coefs,
                note=f"Einstein level {el.label}")


def _not_einstein_parts(ctx: VerifyContext) -> list[Part]:
    pg = ctx.pg()
    el = einstein_level(pg, tol=ctx.tol)
    return [
        _fit_part("S = theta g (Einstein)", el.fits[1], "fails"),
        Part("rank(S - alpha g) = 1 (quasi-Einstein)", "fails", rank_gap(pg, 1),
             note="residual is min over alpha of sigma_2/sigma_1 of S - alpha g"),
    ]


def _roter_part(ctx: VerifyContext, metric: str = "hayward") -> Part:
    fit = roter_fit(ctx.pg(metric), tol=ctx.tol)
    return _fit_part("R = s1 g^g + s2 g^S + s3 S^S", fit, metric=metric)


def _not_ein3_not_gen_roter(ctx: VerifyContext) -> list[Part]:
    pg = ctx.pg()
    el = einstein_level(pg, tol=ctx.tol)
    gr = generalized_roter_fit(pg, tol=ctx.tol)
    return [
        Part("Einstein level is not 3", "flag", flag=el.level is not None and el.level < 3,
             note=f"Einstein level {el.label}: the Ricci operator already satisfies a quadratic relation"),
        Part("no proper generalized Roter form", "flag", flag=bool(np.all(gr.ranks < 6)),
             note=f"ranks of the six Kulkarni-Nomizu products: {sorted(set(int(r) for r in gr.ranks))}; "
             "S^2 depends on g and S so the structure collapses to Roter type"),
    ]


# Props 3.1 - 3.6
_register("prop1-i", "2-quasi-Einstein with alpha = -12 b^2 m^2 / B1^2")(lambda ctx: [_quasi_einstein_part(ctx)])
_register("prop1-ii", "generalized quasi-Einstein with the given alpha, beta = gamma = 1, Pi and phi")(
    lambda ctx: [_gqe_part(ctx)])
_register("prop1-neg", "neither Einstein nor quasi-Einstein")(_not_einstein_parts)
_register("prop2-i", "Roter type")(lambda ctx: [_roter_part(ctx)])
_register("prop2-ii", "Einstein manifold of level 2 with theta1 = 12 b^2 m^2 B2/B1^3, theta2 = 288 b^4 m^4 B3/B1^5")(
    lambda ctx: [_ein2_part(ctx)])
_register("prop2-neg", "neither Ein(3) nor (proper) generalized Roter type")(_not_ein3_not_gen_roter)
_register("prop3-i", "C 2-forms recurrent with Sigma = (0, Sigma2, 0, 0)")(
    lambda ctx: [_two_forms(ctx, "C", "holds", closed=True)])
_register("prop3-ii", "R- and C-compatible tensors are exactly the block-diagonal symmetric tensors")(
    lambda ctx: [_compat_space(ctx, "R"), _compat_space(ctx, "C")])
_register("prop3-neg", "not conformally recurrent")(lambda ctx: [_derivative_fit(ctx, "C", "recurrent")])
_register("prop4-i", "R.R = L_R Q(g,R) and R.C = L_R Q(g,C)")(
    lambda ctx: [_pseudo(ctx, "R", "R", L_R), _pseudo(ctx, "R", "C", L_R)])
_register("prop4-ii", "C.R = L_C Q(g,R) and C.C = L_C Q(g,C)")(
    lambda ctx: [_pseudo(ctx, "C", "R", L_C), _pseudo(ctx, "C", "C", L_C)])
_register("prop4-iii", "R.R - L Q(g,C) = Q(S,R) with L = m(16 b^2 m - r^3)/(B2 B1)")(lambda ctx: [_mixed(ctx)])
_register("prop4-iv", "C.R - R.C = L1 Q(g,R) + L2 Q(S,R)")(lambda ctx: [_commutator(ctx, "R")])
_register("prop4-v", "C.R - R.C = L3 Q(g,C) + L4 Q(S,C) with L4 = 1")(lambda ctx: [_commutator(ctx, "C")])
_register("prop4-neg", "not Ricci generalized pseudosymmetric: R.R = L Q(S,R) fails")(
    lambda ctx: [_ricci_generalized(ctx)])
_register("prop5-i", "R.P = L_R Q(g,P)")(lambda ctx: [_pseudo(ctx, "R", "P", L_R)])
_register("prop5-ii", "P.S = L_R Q(g,S)")(lambda ctx: [_pseudo(ctx, "P", "S", L_R)])
_register("prop5-iii", "P-compatible tensors are exactly the block-diagonal symmetric tensors")(
    lambda ctx: [_compat_space(ctx, "P")])
_register("prop6-i", "W.R = L_C Q(g,R)")(lambda ctx: [_pseudo(ctx, "W", "R", L_C)])
_register("prop6-ii", "K.R = m B2^2/B1^3 Q(g,R)")(lambda ctx: [_pseudo(ctx, "K", "R", L_K)])
_register("prop6-iii", "W- and K-compatible tensors are exactly the block-diagonal symmetric tensors")(
    lambda ctx: [_compat_space(ctx, "W"), _compat_space(ctx, "K")])


def _ricci_generalized(ctx: VerifyContext, metric: str = "hayward", expect: str = "fails") -> Part:
    cx = ctx.cx(metric)
    fit = fit_combo(cx.dot("R", "R"), [cx.q("S", "R")], scale=cx.dot_scale("R", "R"), labels=("L",), tol=ctx.tol,
                    basis_scale=[cx.mag("S") * norm_inf(cx.pg.riemann) + norm_inf(cx.pg.ricci) * cx.mag("R")])
    return _fit_part("R.R = L Q(S,R)", fit, expect)


# main list of curvature properties
_register("thm3-i", "R.H = L_R Q(g,H) for H = R, S, C, P, W, K with L_R = -m B2/B1^2")(_family("R", L_R))
_register("thm3-ii", "C.H = L_C Q(g,H) for H = R, S, C, P, W, K with L_C = -m r^3 B2/B1^3")(_family("C", L_C))
_register("thm3-iii", "W.H = L_C Q(g,H) for H = R, S, C, P, W, K")(_family("W", L_C))
_register("thm3-iv", "K.H = L_K Q(g,H) for H = R, S, C, P, W, K with L_K = m B2^2/B1^3")(_family("K", L_K))
_register("thm3-v", "R.R - L Q(g,C) = Q(S,R)")(lambda ctx: [_mixed(ctx)])
_register("thm3-vi", "C.R - R.C depends linearly on Q(g,C), Q(S,C), Q(g,R), Q(S,R)")(
    lambda ctx: [_commutator(ctx, None)])
_register("thm3-vii", "Ricci pseudosymmetric due to P: P.S = L_R Q(g,S)")(lambda ctx: [_pseudo(ctx, "P", "S", L_R)])
_register("thm3-viii", "conformal 2-forms recurrent with Sigma = (0, Sigma2, 0, 0)")(
    lambda ctx: [_two_forms(ctx, "C", "holds", closed=True)])
_register("thm3-ix", "Roter type")(lambda ctx: [_roter_part(ctx)])
_register("thm3-x", "Ein(2) with the given theta1, theta2")(lambda ctx: [_ein2_part(ctx)])
_register("thm3-xi", "2-quasi-Einstein with alpha = -12 b^2 m^2/B1^2")(lambda ctx: [_quasi_einstein_part(ctx)])
_register("thm3-xii", "generalized quasi-Einstein in the sense of Chaki")(lambda ctx: [_gqe_part(ctx)])
_register("thm3-xiii", "R-, C-, P-, W-, K-compatible tensors are exactly the block-diagonal symmetric tensors")(
    lambda ctx: [_compat_space(ctx, x) for x in "RCPWK"])
_register("thm3-xiv", "S is C-, P-, R-, K- and W-compatible")(lambda ctx: [_ricci_compat(ctx, x) for x in "CPRKW"])

# negative controls
_register("remark-i", "nabla P, nabla R, nabla C, nabla K, nabla W are nonzero")(
    lambda ctx: [_derivative_fit(ctx, x, "parallel") for x in "PRCKW"])
_register("remark-ii", "P, R, W, K, C are not recurrent")(
    lambda ctx: [_derivative_fit(ctx, x, "recurrent") for x in "PRWKC"])
_register("remark-iii", "R.H = 0 fails for H = P, K, W, C, S")(lambda ctx: [_semisym(ctx, h) for h in "PKWCS"])
_register("remark-iv", "not Ricci generalized pseudosymmetric")(lambda ctx: [_ricci_generalized(ctx)])
_register("remark-v", "P.H = L Q(g,H) fails for H = R, W, K, C")(
    lambda ctx: [_pseudo(ctx, "P", h, None, "fails") for h in "RWKC"])
_register("remark-vi", "not a T-space by Venzi for T = C, R, P, W, K")(
    lambda ctx: [_derivative_fit(ctx, x, "venzi") for x in "CRPWK"])
_register("remark-vii", "neither Einstein nor quasi-Einstein")(_not_einstein_parts)
_register("remark-viii", "curvature 2-forms of R, K, W, P are not recurrent")(
    lambda ctx: [_two_forms(ctx, x, "fails") for x in "RKWP"])


def _ricci_derivative_parts(ctx: VerifyContext, expect: str = "fails", metric: str = "hayward") -> list[Part]:
    flags = ricci_derivative_flags(ctx.pg(metric), tol=ctx.tol)
    return [_fit_part("S is Codazzi", flags["codazzi"], expect),
            _fit_part("S is cyclic parallel", flags["cyclic_parallel"], expect)]


_register("remark-ix", "S is neither cyclic parallel nor Codazzi")(_ricci_derivative_parts)
_register("remark-x", "neither weakly symmetric nor Chaki pseudosymmetric for P, W, K, R, C")(
    lambda ctx: [_derivative_fit(ctx, x, w) for x in "PWKRC" for w in ("weak", "chaki")])

# energy-momentum tensor
_register("thm4-i", "R.T = L_R Q(g,T)")(lambda ctx: [_em_part(ctx, "R.T", L_R)])
_register("thm4-ii", "C.T = L_C Q(g,T)")(lambda ctx: [_em_part(ctx, "C.T", L_C)])
_register("thm4-iii", "W.T = L_C Q(g,T)")(lambda ctx: [_em_part(ctx, "W.T", L_C)])
_register("thm4-iv", "K.T = L_K Q(g,T)")(lambda ctx: [_em_part(ctx, "K.T", L_K)])
_register("thm4-v", "T is R-, P-, K-, W- and C-compatible")(
    lambda ctx: [_em_part(ctx, f"T compatible {x}", None) for x in "RPKWC"])

# symmetries and solitons
_register("sec6-killing", "d/dt and d/dphi are Killing")(
    lambda ctx: [_killing(ctx, "hayward", "t", "holds"), _killing(ctx, "hayward", "phi", "holds")])
_register("sec6-killing-combination", "constant combinations of d/dt and d/dphi are Killing")(
    lambda ctx: [_killing(ctx, "hayward", "combo_tphi", "holds")])
_register("sec6-non-killing", "d/dr and d/dtheta are not Killing")(
    lambda ctx: [_killing(ctx, "hayward", "r", "fails"), _killing(ctx, "hayward", "theta", "fails")])
_register("sec6-eta-ricci-yamabe", "almost eta-Ricci-Yamabe soliton along d/dr with eta = dr and the sigma closed forms")(
    lambda ctx: [_soliton(ctx, "hayward", "eta_ricci_yamabe", "holds", closed=True)])
_register("sec6-eta-ricci", "almost eta-Ricci soliton along d/dr where sigma1 = 1")(lambda ctx: [_eta_ricci_locus(ctx)])


def _inherit_negatives(ctx: VerifyContext, kinds) -> list[Part]:
    parts = []
    for which in ("r", "theta", "combo_rtheta"):
        parts += _inheritance_parts(ctx, "hayward", _xi(ctx, "hayward", which), kinds, "fails")
    return parts


_register("sec6-i", "neither Ricci collineation nor Ricci inheritance along d/dr, d/dtheta and their combinations")(
    lambda ctx: _inherit_negatives(ctx, _INHERIT_ALL[0:2]))
_register("sec6-ii", "no (1,3) or (0,4) curvature collineation along d/dr, d/dtheta and their combinations")(
    lambda ctx: _inherit_negatives(ctx, (_INHERIT_ALL[2], _INHERIT_ALL[4])))
_register("sec6-iii", "no (1,3) or (0,4) curvature inheritance along d/dr, d/dtheta and their combinations")(
    lambda ctx: _inherit_negatives(ctx, (_INHERIT_ALL[3], _INHERIT_ALL[5], _INHERIT_ALL[6])))

# comparison with the Reissner-Nordstrom metric
_register("rn-dissimilar-i", "Reissner-Nordstrom conharmonic 2-forms are recurrent, Hayward's are not",
          "reissner_nordstrom")(
    lambda ctx: [_two_forms(ctx, "K", "holds", "reissner_nordstrom"), _two_forms(ctx, "K", "fails")])


def _scalar_parts(ctx: VerifyContext) -> list[Part]:
    out = []
    for metric, expect in (("reissner_nordstrom", "holds"), ("hayward", "fails")):
        pg = ctx.pg(metric)
        kap = Tensor(np.array([pg.geo.scalar], dtype=object), "d")
        fit = vanishing(pg.scalar[:, None], scale=kap.magnitude(pg.cols), tol=ctx.tol)
        out.append(_fit_part("kappa = 0", fit, expect, metric=metric))
    return out


_register("rn-dissimilar-ii", "Reissner-Nordstrom has vanishing scalar curvature, Hayward does not",
          "reissner_nordstrom")(_scalar_parts)
_register("rn-similar-i", "both are Roter type", "reissner_nordstrom")(
    lambda ctx: [_roter_part(ctx, "reissner_nordstrom"), _roter_part(ctx)])


def _level2(ctx: VerifyContext, metric: str) -> Part:
    el = einstein_level(ctx.pg(metric), tol=ctx.tol)
    return Part(f"{metric}: Einstein level 2", "flag", flag=el.level == 2, note=f"level {el.label}")


def _rank2(ctx: VerifyContext, metric: str) -> Part:
    qe = quasi_einstein(ctx.pg(metric))
    return Part(f"{metric}: 2-quasi-Einstein", "flag", flag=qe.rank == 2, note=f"rank {qe.rank}")


_register("rn-similar-ii", "both are Einstein manifolds of level 2", "reissner_nordstrom")(
    lambda ctx: [_level2(ctx, "reissner_nordstrom"), _level2(ctx, "hayward")])
_register("rn-similar-iii", "both are pseudosymmetric and pseudosymmetric due to C", "reissner_nordstrom")(
    lambda ctx: [_pseudo(ctx, x, "R", None, metric=m) for m in ("reissner_nordstrom", "hayward") for x in "RC"])
_register("rn-similar-iv", "conformal 2-forms of both are recurrent", "reissner_nordstrom")(
    lambda ctx: [_two_forms(ctx, "C", "holds", "reissner_nordstrom"), _two_forms(ctx, "C", "holds")])
_register("rn-similar-v", "both are 2-quasi-Einstein", "reissner_nordstrom")(
    lambda ctx: [_rank2(ctx, "reissner_nordstrom"), _rank2(ctx, "hayward")])
_register("rn-similar-vi", "S of both is R- and C-compatible", "reissner_nordstrom")(
    lambda ctx: [_ricci_compat(ctx, x, m) for m in ("reissner_nordstrom", "hayward") for x in "RC"])

# comparison with the point-like global monopole
_MONO = "global_monopole"
_register("monopole-similar-i", "d/dt and d/dphi are Killing in both", _MONO)(
    lambda ctx: [_killing(ctx, m, c, "holds") for m in (_MONO, "hayward") for c in ("t", "phi")])
_register("monopole-similar-ii", "d/dr and d/dtheta are non-Killing in both", _MONO)(
    lambda ctx: [_killing(ctx, m, c, "fails") for m in (_MONO, "hayward") for c in ("r", "theta")])
_register("monopole-similar-iii", "neither (1,3) curvature collineation nor inheritance along d/dtheta in both", _MONO)(
    lambda ctx: [p for m in (_MONO, "hayward") for p in _inheritance_parts(
        ctx, m, _xi(ctx, m, "theta"), (_INHERIT_ALL[2], _INHERIT_ALL[3]), "fails")])
_register("monopole-similar-iv", "neither Ricci collineation nor Ricci inheritance along d/dtheta in both", _MONO)(
    lambda ctx: [p for m in (_MONO, "hayward") for p in _inheritance_parts(
        ctx, m, _xi(ctx, m, "theta"), _INHERIT_ALL[0:2], "fails")])
_register("monopole-dissimilar-i", "monopole has Ricci and (1,3) curvature collineation along d/dr, Hayward does not",
          _MONO)(
    lambda ctx: _inheritance_parts(ctx, _MONO, _xi(ctx, _MONO, "r"), (_INHERIT_ALL[0], _INHERIT_ALL[2]), "holds")
    + _inheritance_parts(ctx, "hayward", _xi(ctx, "hayward", "r"), (_INHERIT_ALL[0], _INHERIT_ALL[2]), "fails"))
_register("monopole-dissimilar-ii",
          "monopole has (0,4) curvature inheritance along d/dr, d/dtheta and combinations, Hayward does not", _MONO)(
    lambda ctx: [p for w in ("r", "theta", "combo_rtheta") for p in
                 _inheritance_parts(ctx, _MONO, _xi(ctx, _MONO, w), (_INHERIT_ALL[5],), "holds")
                 + _inheritance_parts(ctx, "hayward", _xi(ctx, "hayward", w), (_INHERIT_ALL[5],), "fails")])
_register("monopole-dissimilar-iii",
          "Hayward admits the almost eta-Ricci-Yamabe soliton along d/dr with eta = dr, the monopole admits "
          "neither that nor the almost eta-Ricci soliton", _MONO)(
    lambda ctx: [_soliton(ctx, "hayward", "eta_ricci_yamabe", "holds"),
                 _soliton(ctx, _MONO, "eta_ricci_yamabe", "fails"),
                 _soliton(ctx, _MONO, "eta_ricci", "fails")])


# --------------------------------------------------------------------------
# running


def run(pid: str, ctx: VerifyContext) -> Outcome:
    if pid not in REGISTRY:
        raise KeyError(pid)
    prop = REGISTRY[pid]
    from .expr import SingularEvaluation

    try:
        parts = prop.build(ctx)
    except (SingularEvaluation, np.linalg.LinAlgError) as err:
        return Outcome(pid, prop.statement, prop.metric, [], ctx.tol, error=str(err))
    return Outcome(pid, prop.statement, prop.metric, parts, ctx.tol)


def run_all(ctx: VerifyContext, ids=None) -> list[Outcome]:
    return [run(pid, ctx) for pid in (ids or REGISTRY)]
