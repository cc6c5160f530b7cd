"""Structure detectors on sampled points and the consolidated classification report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .expr import Expr
from .pseudo import (
    DEPENDENT_TOL,
    INDEPENDENT_TOL,
    RANK_RTOL,
    ROUNDOFF_FLOOR,
    FitResult,
    dot_action,
    fit_combo,
    norm_inf,
    tachibana,
    vanishing,
)
from .tensor import PointGeometry, Tensor, kulkarni_nomizu

CURVATURE_KINDS = ("R", "C", "W", "K", "P")


def _batched(T) -> np.ndarray:
    d = T.data if isinstance(T, Tensor) else np.asarray(T, dtype=float)
    return d if d.ndim and (not isinstance(T, Tensor) or T.batched) else d[None, ...]


def _nullspace(A: np.ndarray, floor: float, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal nullspace basis (rows) of ``A``; singular values below
    ``rtol * max(sigma_max, floor)`` count as zero."""
    k = A.shape[1]
    if A.size == 0:
        return np.eye(k)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    ref = max(s[0] if s.size else 0.0, floor)
    rank = int(np.sum(s > rtol * ref)) if ref > 0 else 0
    return Vt[rank:]


# --------------------------------------------------------------------------
# Einstein level and quasi-Einstein rank


@dataclass(frozen=True)
class EinsteinLevel:
    """``level`` is None when no level up to ``max_level`` passes (reported as infinity)."""

    level: int | None
    coefficients: np.ndarray  # (N, level): theta_1..theta_k, theta_j multiplies S^{k-j}
    fits: dict[int, FitResult]

    @property
    def label(self) -> str:
        return "inf" if self.level is None else str(self.level)


def _product_floor(*factors) -> np.ndarray:
    """First-order round-off bound of a product from (magnitude, actual norm) pairs.

    sum_i m_i prod_{j != i} |F_j|; the plain product of magnitudes overstates
    the error wherever the factors suffer cancellation.
    """
    out = 0.0
    for i, (m, _) in enumerate(factors):
        term = np.asarray(m, dtype=float)
        for j, (_, a) in enumerate(factors):
            if j != i:
                term = term * a
        out = out + term
    return np.asarray(out, dtype=float)


def einstein_level(pg: PointGeometry, max_level: int = 4, tol: float = DEPENDENT_TOL) -> EinsteinLevel:
    """Smallest k with S^k + theta_1 S^{k-1} + ... + theta_k g = 0 at every point."""
    magS = pg.magnitude("ricci")
    nS = norm_inf(pg.ricci)
    gi = norm_inf(pg.ginv) * pg.n
    fits: dict[int, FitResult] = {}
    magg = pg.magnitude("g")
    for k in range(1, max_level + 1):
        powers = [pg.g] + [pg.ricci_power(j) for j in range(1, k)]
        floors = [magg] + [j * magS * nS ** (j - 1) * gi ** (j - 1) for j in range(1, k)]
        lhs = pg.ricci_power(k)
        scale = magS**k * gi ** (k - 1)
        basis = list(reversed(powers))  # S^{k-1}, ..., S, g
        labels = tuple(f"theta{j}" for j in range(1, k + 1))
        fit = fit_combo(lhs, basis, scale=scale, labels=labels, tol=tol, basis_scale=floors[::-1])
        fit = FitResult(-fit.coefficients, fit.residuals, fit.ranks, labels, tol, note=f"Ein({k})")
        fits[k] = fit
        if fit.holds:
            return EinsteinLevel(k, fit.coefficients, fits)
    return EinsteinLevel(None, np.zeros((pg.size, 0)), fits)


@dataclass(frozen=True)
class QuasiEinstein:
    ranks: np.ndarray
    alphas: np.ndarray

    @property
    def rank(self) -> int:
        """Smallest rank achievable at every sampled point."""
        return int(self.ranks.max()) if self.ranks.size else 0

    @property
    def label(self) -> str:
        return {0: "Einstein", 1: "quasi-Einstein", 2: "2-quasi-Einstein"}.get(self.rank, f"rank {self.rank}")


def quasi_einstein(pg: PointGeometry, rtol: float = RANK_RTOL) -> QuasiEinstein:
    """Minimise rank(S - alpha g) over alpha in the spectrum of the Ricci operator.

    Ties in rank are broken by the smallest alpha. Values of alpha below the
    round-off scale of S are reported as 0.
    """
    S, g, gi = _batched(pg.ricci), _batched(pg.g), _batched(pg.ginv)
    magS = pg.magnitude("ricci")
    N = S.shape[0]
    ranks = np.zeros(N, dtype=int)
    alphas = np.zeros(N)
    for i in range(N):
        J = gi[i] @ S[i]
        cands = np.real(np.linalg.eigvals(J))
        sg = np.linalg.svd(g[i], compute_uv=False)[0]
        sS = np.linalg.svd(S[i], compute_uv=False)[0]
        best = None
        for a in cands:
            if abs(a) * sg <= 1e-8 * magS[i]:
                a = 0.0
            s = np.linalg.svd(S[i] - a * g[i], compute_uv=False)
            ref = max(sS, abs(a) * sg, magS[i])
            r = int(np.sum(s > rtol * ref))
            key = (r, a)
            if best is None or key < best:
                best = key
        ranks[i], alphas[i] = best
    return QuasiEinstein(ranks, alphas)


def rank_gap(pg: PointGeometry, rank: int) -> np.ndarray:
    """Per-point min over alpha of sigma_{rank+1}(S - alpha g) / sigma_1(S - alpha g).

    Zero (up to round-off) exactly when some alpha brings S - alpha g down to
    ``rank``; the candidates are the eigenvalues of the Ricci operator.
    """
    S, g, gi = _batched(pg.ricci), _batched(pg.g), _batched(pg.ginv)
    N = S.shape[0]
    out = np.zeros(N)
    for i in range(N):
        best = np.inf
        for a in np.unique(np.real(np.linalg.eigvals(gi[i] @ S[i]))):
            s = np.linalg.svd(S[i] - a * g[i], compute_uv=False)
            best = min(best, s[rank] / s[0] if s[0] > 0 else 0.0)
        out[i] = best
    return out


def _eval_scalar(pg: PointGeometry, v) -> np.ndarray:
    if isinstance(v, str):
        v = pg.geo.spec.parse(v)
    if isinstance(v, Expr):
        return pg.evaluate(v)
    return np.broadcast_to(np.asarray(v, dtype=float), (pg.size,)).copy()


def _eval_form(pg: PointGeometry, comps: Sequence) -> np.ndarray:
    return np.stack([_eval_scalar(pg, c) for c in comps], axis=1)


def gqe_verify(pg: PointGeometry, alpha, beta, gamma, Pi: Sequence, phi: Sequence, tol: float = DEPENDENT_TOL) -> FitResult:
    """Residual of S - [alpha g + beta Pi(x)Pi + gamma (Pi(x)phi + phi(x)Pi)] at each point.

    Scalars and 1-form components may be numbers, expression strings in the
    chart symbols, or :class:`Expr` objects.
    """
    a, b, c = (_eval_scalar(pg, v) for v in (alpha, beta, gamma))
    P, F = _eval_form(pg, Pi), _eval_form(pg, phi)
    g, S = _batched(pg.g), _batched(pg.ricci)
    PP = np.einsum("ia,ib->iab", P, P)
    PF = np.einsum("ia,ib->iab", P, F)
    model = a[:, None, None] * g + b[:, None, None] * PP + c[:, None, None] * (PF + np.swapaxes(PF, 1, 2))
    diff = (S - model).reshape(pg.size, -1)
    num = np.abs(diff).max(axis=1)
    den = np.maximum.reduce([np.abs(S).reshape(pg.size, -1).max(axis=1), np.abs(model).reshape(pg.size, -1).max(axis=1), ROUNDOFF_FLOOR * pg.magnitude("ricci")])
    res = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return FitResult(np.zeros((pg.size, 0)), res, np.zeros(pg.size, dtype=int), (), tol, note="generalized quasi-Einstein")


# --------------------------------------------------------------------------
# Roter type


def roter_fit(pg: PointGeometry, tol: float = DEPENDENT_TOL) -> FitResult:
    """R = s1 g^g + s2 g^S + s3 S^S per point."""
    g, S = (pg.magnitude("g"), norm_inf(pg.g)), (pg.magnitude("ricci"), norm_inf(pg.ricci))
    floors = [_product_floor(g, g), _product_floor(g, S), _product_floor(S, S)]
    return fit_combo(
        pg.riemann,
        [pg.gg, pg.gS, pg.SS],
        scale=pg.magnitude("riemann"),
        labels=("s1", "s2", "s3"),
        tol=tol,
        basis_scale=floors,
    )


def generalized_roter_fit(pg: PointGeometry, tol: float = DEPENDENT_TOL) -> FitResult:
    """R against g^g, g^S, g^S2, S^S, S^S2, S2^S2 (coefficients s1..s6).

    ``ranks`` below 6 mean S2 is dependent on g and S, i.e. the structure
    collapses to Roter type.
    """
    S2 = pg.ricci_power(2)
    basis = [
        pg.gg,
        pg.gS,
        kulkarni_nomizu(pg.g, S2),
        pg.SS,
        kulkarni_nomizu(pg.ricci, S2),
        kulkarni_nomizu(S2, S2),
    ]
    g, S = (pg.magnitude("g"), norm_inf(pg.g)), (pg.magnitude("ricci"), norm_inf(pg.ricci))
    s2 = (_product_floor(S, S) * norm_inf(pg.ginv) * pg.n, norm_inf(S2))
    floors = [_product_floor(a, b) for a, b in ((g, g), (g, S), (g, s2), (S, S), (S, s2), (s2, s2))]
    labels = tuple(f"s{j}" for j in range(1, 7))
    return fit_combo(pg.riemann, basis, scale=pg.magnitude("riemann"), labels=labels, tol=tol, basis_scale=floors)


# --------------------------------------------------------------------------
# compatibility


def _sym_basis(n: int) -> list[np.ndarray]:
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return out


def _compat_map(T: np.ndarray, Z: np.ndarray, gi: np.ndarray) -> np.ndarray:
    """Cyclic sum over (x, b, c) of T(Zx, e, b, c) for one point."""
    endo = gi @ Z  # endo[a, x] = g^{ad} Z_{dx}
    U = np.einsum("ax,aebc->xebc", endo, T)
    return U + _cyc(U)


def _cyc(U: np.ndarray) -> np.ndarray:
    # U[b,e,c,x] and U[c,e,x,b] re-indexed to slots (x,e,b,c)
    return np.einsum("becx->xebc", U) + np.einsum("cexb->xebc", U)


def compatibility_order(T: Tensor) -> Tensor:
    """Swap the index pairs of a (0,4) tensor before the compatibility test.

    The condition cycles slots 1, 3 and 4 of its argument. After the swap
    those are the stored slots 3, 1 and 2, which is where the tensor's first
    Bianchi identity lives, so Z = g is always compatible. For tensors with
    pair symmetry (R, C, W, K) the swap changes nothing; the projective
    tensor is the one case where it matters.
    """
    d = np.einsum("...abcd->...cdab", T.data)
    return Tensor(d, T.positions, T.name)


def compatibility_residual(T: Tensor, Z: Tensor, ginv: Tensor, scale=None, tol: float = DEPENDENT_TOL) -> FitResult:
    """Residual of the T-compatibility condition for a given symmetric Z."""
    Td, Zd, gi = _batched(T), _batched(Z), _batched(ginv)
    out = np.stack([_compat_map(Td[i], Zd[i], gi[i]) for i in range(Td.shape[0])])
    return vanishing(out, scale=scale, tol=tol)


@dataclass(frozen=True)
class CompatibleSpace:
    """Per-point nullspace of the compatibility system, as symmetric matrices."""

    bases: list[np.ndarray]  # each (dim, n, n)

    @property
    def dims(self) -> np.ndarray:
        return np.array([b.shape[0] for b in self.bases])

    def support(self, tol: float = 1e-9) -> np.ndarray:
        """Boolean (n, n) mask of entries that are nonzero in some basis element at some point."""
        n = self.bases[0].shape[-1]
        mask = np.zeros((n, n), dtype=bool)
        for B in self.bases:
            if B.size:
                mask |= np.abs(B).max(axis=0) > tol
        return mask

    def contains(self, Z: np.ndarray, scale=None) -> np.ndarray:
        """Relative distance of Z (N, n, n) from the nullspace at each point.

        ``scale`` floors the normalisation, so a Z that is pure round-off
        counts as contained.
        """
        out = np.zeros(len(self.bases))
        floor = np.zeros(len(self.bases)) if scale is None else np.broadcast_to(np.asarray(scale, float), (len(self.bases),))
        for i, B in enumerate(self.bases):
            z = Z[i].ravel()
            nz = max(np.abs(z).max(), ROUNDOFF_FLOOR * floor[i])
            if nz == 0:
                continue
            V = B.reshape(B.shape[0], z.size)
            if V.shape[0]:
                Q, _ = np.linalg.qr(V.T)
                proj = Q @ (Q.T @ z)
            else:
                proj = np.zeros_like(z)
            out[i] = np.abs(z - proj).max() / nz
        return out


def compatible_space(T: Tensor, ginv: Tensor, scale=None, rtol: float = RANK_RTOL) -> CompatibleSpace:
    """Nullspace over the n(n+1)/2 entries of a symmetric Z of the compatibility condition."""
    Td, gi = _batched(T), _batched(ginv)
    N, n = Td.shape[0], Td.shape[-1]
    floor = np.zeros(N) if scale is None else np.broadcast_to(np.asarray(scale, float), (N,))
    E = _sym_basis(n)
    bases = []
    for i in range(N):
        A = np.stack([_compat_map(Td[i], Ek, gi[i]).ravel() for Ek in E], axis=1)
        ns = _nullspace(A, floor[i] * np.abs(gi[i]).max(), rtol)
        mats = np.einsum("kj,jab->kab", ns, np.array(E)) if ns.size else np.zeros((0, n, n))
        bases.append(mats)
    return CompatibleSpace(bases)


# --------------------------------------------------------------------------
# recurrence, 2-forms, Venzi, weak symmetry


def recurrence_fit(
    T: Tensor, DT: Tensor, scale=None, tol: float = DEPENDENT_TOL, tensor_scale=None
) -> FitResult:
    """Pi from nabla_f T_{abcd} = Pi_f T_{abcd}.

    ``scale`` is the round-off magnitude of nabla T, ``tensor_scale`` that of
    T (columns below it are treated as zero).
    """
    Td = _batched(T)
    n = Td.shape[-1]
    basis = []
    for f in range(n):
        e = np.zeros(n)
        e[f] = 1.0
        basis.append(np.einsum("...abcd,f->...abcdf", Td, e))
    floors = None if tensor_scale is None else [tensor_scale] * n
    labels = tuple(f"Pi{f + 1}" for f in range(n))
    return fit_combo(DT, basis, scale=scale, labels=labels, tol=tol, basis_scale=floors)


def _cyclic_first3(Td: np.ndarray, n: int) -> list[np.ndarray]:
    """Columns of Sigma -> cyclic sum over (x, y, z) of Sigma_x T_{y z u v}."""
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        a = np.einsum("x,...yzuv->...xyzuv", e, Td)
        cols.append(a + np.einsum("...yzxuv->...xyzuv", a) + np.einsum("...zxyuv->...xyzuv", a))
    return cols


def _venzi_matrix(Td: np.ndarray, n: int) -> np.ndarray:
    cols = _cyclic_first3(Td, n)
    return np.stack([c.reshape(Td.shape[0], -1) for c in cols], axis=-1)


def venzi_gap(T: Tensor, scale=None) -> np.ndarray:
    """Per-point sigma_min / sigma_max of the column-normalised Venzi map Pi -> cyclic sum.

    Zero (up to round-off) exactly when a nonzero Pi annihilates T cyclically.
    Columns at or below ``RANK_RTOL * scale`` count as zero and give a gap of 0.
    """
    Td = _batched(T)
    N, n = Td.shape[0], Td.shape[-1]
    floor = np.zeros(N) if scale is None else np.broadcast_to(np.asarray(scale, float), (N,))
    A = _venzi_matrix(Td, n)
    out = np.zeros(N)
    for i in range(N):
        norms = np.abs(A[i]).max(axis=0)
        if np.any(norms <= RANK_RTOL * floor[i]) or not norms.any():
            continue
        s = np.linalg.svd(A[i] / norms, compute_uv=False)
        out[i] = s[-1] / s[0]
    return out


def two_form_recurrence(
    T: Tensor, DT: Tensor, scale=None, tol: float = DEPENDENT_TOL, tensor_scale=None
) -> FitResult:
    """Nonzero Sigma with cyclic sum over (x,y,z) of nabla_x T_{yzuv} = Sigma_x T_{yzuv}.

    Where only Sigma = 0 fits (the cyclic sum vanishes, as it does for R by the
    second Bianchi identity) a nonzero Sigma must lie in the Venzi space, so the
    point's residual becomes ``venzi_gap``.
    """
    Td, D = _batched(T), _batched(DT)
    n = Td.shape[-1]
    # D[..., y, z, u, v, x] = nabla_x T_{yzuv}; move x to the front
    a = np.einsum("...yzuvx->...xyzuv", D)
    lhs = a + np.einsum("...yzxuv->...xyzuv", a) + np.einsum("...zxyuv->...xyzuv", a)
    cols = _cyclic_first3(Td, n)
    floors = None if tensor_scale is None else [tensor_scale] * n
    labels = tuple(f"Sigma{i + 1}" for i in range(n))
    fit = fit_combo(lhs, cols, scale=scale, labels=labels, tol=tol, basis_scale=floors)
    N = Td.shape[0]
    mD = np.zeros(N) if scale is None else np.broadcast_to(np.asarray(scale, float), (N,))
    mT = np.ones(N) if tensor_scale is None else np.broadcast_to(np.asarray(tensor_scale, float), (N,))
    natural = mD / np.maximum(mT, 1e-300)
    sig = np.abs(fit.coefficients).max(axis=1)
    zero = sig <= ROUNDOFF_FLOOR * natural
    if not zero.any():
        return fit
    gap = venzi_gap(T, scale=tensor_scale)
    res = np.where(zero, np.maximum(fit.residuals, gap), fit.residuals)
    note = "only the zero 1-form fits the cyclic sum at some points; residual there is the Venzi gap"
    return replace(fit, residuals=res, note=note)


def venzi_dim(T: Tensor, scale=None, rtol: float = RANK_RTOL) -> np.ndarray:
    """Per-point dimension of {Pi : cyclic sum of Pi(x) T(y,z,u,v) = 0}."""
    Td = _batched(T)
    N, n = Td.shape[0], Td.shape[-1]
    floor = np.zeros(N) if scale is None else np.broadcast_to(np.asarray(scale, float), (N,))
    A = _venzi_matrix(Td, n)
    return np.array([_nullspace(A[i], floor[i], rtol).shape[0] for i in range(N)])


def _weak_columns(Td: np.ndarray, n: int) -> tuple[list, list, list]:
    P, O1, O2 = [], [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        P.append(np.einsum("...abcd,f->...abcdf", Td, e))
        O1.append(np.einsum("a,...fbcd->...abcdf", e, Td) + np.einsum("b,...afcd->...abcdf", e, Td))
        O2.append(np.einsum("c,...abfd->...abcdf", e, Td) + np.einsum("d,...abcf->...abcdf", e, Td))
    return P, O1, O2


def weak_symmetry_fit(
    T: Tensor, DT: Tensor, scale=None, chaki: bool = False, tol: float = DEPENDENT_TOL, tensor_scale=None
) -> FitResult:
    """Fit nabla_f T_{abcd} = Pi_f T_{abcd} + O1_a T_{fbcd} + O1_b T_{afcd} + O2_c T_{abfd} + O2_d T_{abcf}.

    With ``chaki`` the 1-forms are tied, O1 = O2 = Pi/2, leaving 4 unknowns.
    """
    Td = _batched(T)
    n = Td.shape[-1]
    P, O1, O2 = _weak_columns(Td, n)
    if chaki:
        cols = [P[i] + 0.5 * (O1[i] + O2[i]) for i in range(n)]
        labels = tuple(f"Pi{i + 1}" for i in range(n))
    else:
        cols = P + O1 + O2
        labels = tuple(f"{nm}{i + 1}" for nm in ("Pi", "Omega1_", "Omega2_") for i in range(n))
    floors = None if tensor_scale is None else [tensor_scale] * len(cols)
    return fit_combo(DT, cols, scale=scale, labels=labels, tol=tol, basis_scale=floors)


def ricci_derivative_flags(pg: PointGeometry, tol: float = DEPENDENT_TOL) -> dict[str, FitResult]:
    """Codazzi (nabla_a S_bc = nabla_b S_ac) and cyclic-parallel residuals."""
    D = _batched(pg.nabla_ricci)  # D[x, y, f] = nabla_f S_xy
    scale = pg.magnitude("nabla_ricci")
    codazzi = np.einsum("...bca->...abc", D) - np.einsum("...acb->...abc", D)
    cyclic = np.einsum("...bca->...abc", D) + np.einsum("...cab->...abc", D) + np.einsum("...abc->...abc", D)
    return {
        "codazzi": vanishing(codazzi, scale=scale, tol=tol),
        "cyclic_parallel": vanishing(cyclic, scale=scale, tol=tol),
    }


# --------------------------------------------------------------------------
# consolidated report

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"
_VERDICT = {"dependent": HOLDS, "independent": FAILS, "inconclusive": INCONCLUSIVE}


@dataclass
class PropertyRecord:
    name: str
    verdict: str
    residual: float
    points: int
    witness: dict = field(default_factory=dict)
    note: str = ""
    closed_form: str | None = None
    closed_form_error: float | None = None

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "verdict": self.verdict,
            "residual": None if not np.isfinite(self.residual) else self.residual,
            "points": self.points,
            "witness": self.witness,
            "note": self.note,
        }
        if self.closed_form is not None:
            out["closed_form"] = self.closed_form
            out["closed_form_error"] = self.closed_form_error
        return out

    @classmethod
    def from_dict(cls, d: dict) -> PropertyRecord:
        res = d["residual"]
        return cls(
            d["name"],
            d["verdict"],
            float("nan") if res is None else float(res),
            int(d["points"]),
            dict(d.get("witness", {})),
            d.get("note", ""),
            d.get("closed_form"),
            d.get("closed_form_error"),
        )


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def record_from_fit(name: str, fit: FitResult, coefficients: bool = True, note: str = "") -> PropertyRecord:
    witness: dict = {}
    if coefficients and fit.coefficients.shape[1]:
        witness = {lab: _floats(fit.coefficients[:, j]) for j, lab in enumerate(fit.labels)}
    if np.any(fit.indeterminate):
        witness["basis_rank"] = [int(r) for r in fit.ranks]
    witness["fraction_independent"] = fit.fraction_independent
    return PropertyRecord(name, _VERDICT[fit.verdict], fit.max_residual, fit.points, witness, note or fit.note)


def record_from_flag(name: str, flag: bool, points: int, witness: dict | None = None, note: str = "") -> PropertyRecord:
    return PropertyRecord(name, HOLDS if flag else FAILS, 0.0, points, witness or {}, note)


@dataclass
class ClassificationReport:
    metric: str
    params: dict
    seed: int
    tol: float
    sample: list[dict]
    properties: list[PropertyRecord] = field(default_factory=list)

    def add(self, rec: PropertyRecord) -> None:
        if any(p.name == rec.name for p in self.properties):
            raise ValueError(f"duplicate property {rec.name!r}")
        self.properties.append(rec)

    def get(self, name: str) -> PropertyRecord:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    def verdicts(self) -> dict[str, str]:
        return {p.name: p.verdict for p in self.properties}

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "params": dict(self.params),
            "seed": self.seed,
            "tol": self.tol,
            "points": len(self.sample),
            "sample": self.sample,
            "properties": [p.to_dict() for p in self.properties],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> ClassificationReport:
        missing = {"metric", "params", "seed", "tol", "sample", "properties"} - set(d)
        if missing:
            raise ValueError(f"report is missing {sorted(missing)}")
        rep = cls(d["metric"], dict(d["params"]), int(d["seed"]), float(d["tol"]), list(d["sample"]))
        for p in d["properties"]:
            rep.add(PropertyRecord.from_dict(p))
        return rep

    @classmethod
    def from_json(cls, text: str) -> ClassificationReport:
        return cls.from_dict(json.loads(text))

    def to_markdown(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self.params.items()) or "none"
        lines = [
            f"# {self.metric}",
            "",
            f"params: {params}; seed {self.seed}; {len(self.sample)} points; tol {self.tol:g}",
            "",
            "| property | verdict | max residual | witness |",
            "|---|---|---|---|",
        ]
        for p in self.properties:
            lines.append(f"| {p.name} | {p.verdict} | {p.residual:.3g} | {_witness_summary(p)} |")
        return "\n".join(lines) + "\n"


def _witness_summary(p: PropertyRecord) -> str:
    parts = []
    if p.closed_form is not None:
        err = "n/a" if p.closed_form_error is None else f"{p.closed_form_error:.2g}"
        parts.append(f"{p.closed_form} (rel. err {err})")
    for k, v in p.witness.items():
        if k in ("fraction_independent",):
            continue
        if isinstance(v, list) and v and isinstance(v[0], float):
            parts.append(f"{k}@1={v[0]:.6g}")
        elif isinstance(v, (int, float, str)):
            parts.append(f"{k}={v}")
    return "; ".join(parts)


def comparison_table(reports: Sequence[ClassificationReport]) -> dict:
    """Rows are property names (in first-seen order), columns the reports."""
    names: list[str] = []
    for r in reports:
        for p in r.properties:
            if p.name not in names:
                names.append(p.name)
    columns = [r.metric for r in reports]
    rows = []
    for nm in names:
        cells = []
        for r in reports:
            try:
                cells.append(r.get(nm).verdict)
            except KeyError:
                cells.append("-")
        rows.append({"property": nm, "verdicts": cells})
    return {"columns": columns, "rows": rows}


def comparison_markdown(table: dict) -> str:
    cols = table["columns"]
    lines = ["| property | " + " | ".join(cols) + " |", "|---|" + "---|" * len(cols)]
    for row in table["rows"]:
        mark = "" if len(set(row["verdicts"])) == 1 else " *"
        lines.append(f"| {row['property']}{mark} | " + " | ".join(row["verdicts"]) + " |")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# report assembly

PSEUDO_ACTORS = ("R", "C", "W", "K", "P")
PSEUDO_TARGETS = ("R", "S", "C", "P", "W", "K")


@dataclass(frozen=True)
class ClosedForm:
    """Expected coefficient function for one report row, as an expression string."""

    expression: str
    label: str | None = None  # witness key; default is the row's first coefficient


class _Ctx:
    """Evaluated tensors and their round-off magnitudes, shared by the detectors."""

    def __init__(self, pg: PointGeometry):
        self.pg = pg
        self.gi = norm_inf(pg.ginv)
        self._dots: dict = {}
        self._qs: dict = {}

    def tensor(self, h: str) -> Tensor:
        return self.pg.ricci if h == "S" else self.pg.curvature(h)

    def mag(self, h: str) -> np.ndarray:
        return self.pg.magnitude("ricci" if h == "S" else h)

    def dot(self, x: str, h: str) -> Tensor:
        if (x, h) not in self._dots:
            self._dots[(x, h)] = dot_action(self.pg.curvature(x), self.tensor(h), self.pg.ginv)
        return self._dots[(x, h)]

    def q(self, z: str, h: str) -> Tensor:
        if (z, h) not in self._qs:
            Z = self.pg.g if z == "g" else self.pg.ricci
            self._qs[(z, h)] = tachibana(Z, self.tensor(h))
        return self._qs[(z, h)]

    def dot_scale(self, x: str, h: str) -> np.ndarray:
        return self.gi * self.mag(x) * self.mag(h)


def _scalar_rows(pg: PointGeometry) -> list[PropertyRecord]:
    geo = pg.geo
    kap_t = Tensor(np.array([geo.scalar], dtype=object), "d")
    kap = pg.scalar
    kmag = kap_t.magnitude(pg.cols)
    rows = [record_from_fit("scalar_curvature_zero", vanishing(kap[:, None], scale=kmag), coefficients=False)]
    rows[0].witness["kappa"] = _floats(kap)
    dk = Tensor(np.array([ex.differentiate(geo.scalar, c) for c in geo.coords], dtype=object), "d")
    dkv = pg.evaluate(dk)
    rows.append(
        record_from_fit(
            "constant_scalar_curvature", vanishing(dkv, scale=dk.magnitude(pg.cols)), coefficients=False
        )
    )
    rows.append(record_from_fit("flat", vanishing(pg.riemann, scale=pg.magnitude("riemann")), coefficients=False))
    rows.append(record_from_fit("ricci_flat", vanishing(pg.ricci, scale=pg.magnitude("ricci")), coefficients=False))
    return rows


def _ricci_structure_rows(pg: PointGeometry, tol: float) -> list[PropertyRecord]:
    N = pg.size
    rows = []
    el = einstein_level(pg, tol=tol)
    rec = record_from_fit("einstein", el.fits[1], note="S = theta g")
    rec.verdict = HOLDS if el.level == 1 else rec.verdict
    rows.append(rec)
    w = {"level": el.label}
    if el.level is not None:
        w.update({f"theta{j + 1}": _floats(el.coefficients[:, j]) for j in range(el.coefficients.shape[1])})
    fit = el.fits[el.level] if el.level is not None else el.fits[max(el.fits)]
    rec = PropertyRecord("einstein_level", HOLDS if el.level is not None else FAILS, fit.max_residual, N, w)
    rows.append(rec)
    qe = quasi_einstein(pg)
    w = {"rank": qe.rank, "ranks": [int(r) for r in qe.ranks], "alpha": _floats(qe.alphas)}
    rec = record_from_flag("quasi_einstein", qe.rank == 1, N, dict(w), note="rank(S - alpha g) = 1; residual is the rank-1 gap")
    if qe.rank > 1:
        gap = rank_gap(pg, 1)
        rec.residual = float(gap.max())
        rec.witness["fraction_independent"] = float(np.mean(gap >= INDEPENDENT_TOL))
    rows.append(rec)
    rows.append(record_from_flag("2_quasi_einstein", qe.rank == 2, N, dict(w), note="rank(S - alpha g) = 2"))
    rows.append(
        record_from_flag(
            "generalized_quasi_einstein",
            qe.rank <= 2,
            N,
            {"rank": qe.rank},
            note="S - alpha g of rank <= 2 always admits the beta, gamma, Pi, phi form",
        )
    )
    rows.append(record_from_fit("roter_type", roter_fit(pg, tol=tol)))
    gr = generalized_roter_fit(pg, tol=tol)
    rec = record_from_fit("generalized_roter_type", gr)
    rec.witness["basis_rank"] = [int(r) for r in gr.ranks]
    if gr.holds and np.all(gr.ranks < 6):
        rec.note = "basis is rank deficient: the structure reduces to a smaller one (Roter type or simpler)"
    rows.append(rec)
    rows.append(
        record_from_flag(
            "proper_generalized_roter_type",
            gr.holds and bool(np.all(gr.ranks == 6)),
            N,
            {"basis_rank": [int(r) for r in gr.ranks]},
            note="generalized Roter form with all six products independent",
        )
    )
    return rows


def _pseudo_rows(cx: _Ctx, tol: float) -> list[PropertyRecord]:
    rows = []
    for x in PSEUDO_ACTORS:
        for h in PSEUDO_TARGETS:
            fit = fit_combo(
                cx.dot(x, h),
                [cx.q("g", h)],
                scale=cx.dot_scale(x, h),
                labels=(f"L_{x}",),
                tol=tol,
                basis_scale=[norm_inf(cx.pg.g) * cx.mag(h)],
            )
            rows.append(record_from_fit(f"{x}.{h} = L Q(g,{h})", fit))
    for h in ("R", "S", "C", "P", "W", "K"):
        fit = vanishing(cx.dot("R", h), scale=cx.dot_scale("R", h), tol=tol)
        rows.append(record_from_fit(f"R.{h} = 0", fit, coefficients=False))
    magS, magR, magC = cx.mag("S"), cx.mag("R"), cx.mag("C")
    lhs = cx.dot("R", "R") - cx.q("S", "R")
    fit = fit_combo(
        lhs,
        [cx.q("g", "C")],
        scale=cx.dot_scale("R", "R") + magS * magR,
        labels=("L",),
        tol=tol,
    )
    rows.append(record_from_fit("R.R - L Q(g,C) = Q(S,R)", fit))
    lhs = cx.dot("C", "R") - cx.dot("R", "C")
    basis = [cx.q("g", "C"), cx.q("S", "C"), cx.q("g", "R"), cx.q("S", "R")]
    fit = fit_combo(
        lhs,
        basis,
        scale=cx.dot_scale("C", "R") + cx.dot_scale("R", "C"),
        labels=("L1", "L2", "L3", "L4"),
        tol=tol,
    )
    rows.append(record_from_fit("C.R - R.C in span Q(g,C), Q(S,C), Q(g,R), Q(S,R)", fit))
    fit = fit_combo(
        cx.dot("R", "R"),
        [cx.q("S", "R")],
        scale=cx.dot_scale("R", "R"),
        labels=("L",),
        tol=tol,
        basis_scale=[_product_floor((magS, norm_inf(cx.pg.ricci)), (magR, norm_inf(cx.pg.riemann)))],
    )
    rows.append(record_from_fit("R.R = L Q(S,R)", fit))
    return rows


def _derivative_rows(pg: PointGeometry, tol: float) -> list[PropertyRecord]:
    rows = []
    N = pg.size
    for x in CURVATURE_KINDS:
        T, DT = pg.curvature(x), pg.nabla(x)
        mT, mD = pg.magnitude(x), pg.magnitude(f"nabla {x}")
        rows.append(record_from_fit(f"nabla {x} = 0", vanishing(DT, scale=mD, tol=tol), coefficients=False))
        rows.append(record_from_fit(f"{x} recurrent", recurrence_fit(T, DT, scale=mD, tol=tol, tensor_scale=mT)))
        rows.append(
            record_from_fit(f"{x} 2-forms recurrent", two_form_recurrence(T, DT, scale=mD, tol=tol, tensor_scale=mT))
        )
        vd = venzi_dim(T, scale=mT)
        gap = venzi_gap(T, scale=mT)
        rows.append(
            PropertyRecord(
                f"venzi {x}-space",
                HOLDS if np.all(vd >= 1) else FAILS,
                float(gap.max()),
                N,
                {"dim": [int(v) for v in vd], "fraction_independent": float(np.mean(gap >= INDEPENDENT_TOL))},
                "residual is sigma_min/sigma_max of the Venzi map",
            )
        )
        rows.append(record_from_fit(f"weakly {x}-symmetric", weak_symmetry_fit(T, DT, scale=mD, tol=tol, tensor_scale=mT)))
        rows.append(
            record_from_fit(
                f"chaki {x}-pseudosymmetric", weak_symmetry_fit(T, DT, scale=mD, chaki=True, tol=tol, tensor_scale=mT)
            )
        )
    return rows


BLOCK_PATTERN = np.array([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]], dtype=bool)


def _compat_rows(pg: PointGeometry, tol: float) -> list[PropertyRecord]:
    rows = []
    N = pg.size
    magS = pg.magnitude("ricci")
    for x in CURVATURE_KINDS:
        T = compatibility_order(pg.curvature(x))
        cs = compatible_space(T, pg.ginv, scale=pg.magnitude(x))
        support = cs.support()
        w = {"dim": [int(d) for d in cs.dims], "support": support.astype(int).tolist()}
        rows.append(
            PropertyRecord(f"{x}-compatible tensors", HOLDS, 0.0, N, w, note="nullspace of the compatibility system")
        )
        dist = cs.contains(_batched(pg.ricci), scale=magS)
        fit = FitResult(np.zeros((N, 0)), dist, np.zeros(N, dtype=int), (), tol)
        rows.append(record_from_fit(f"ricci {x}-compatible", fit, coefficients=False))
    return rows


def _ricci_derivative_rows(pg: PointGeometry, tol: float) -> list[PropertyRecord]:
    flags = ricci_derivative_flags(pg, tol=tol)
    return [
        record_from_fit("ricci codazzi", flags["codazzi"], coefficients=False),
        record_from_fit("ricci cyclic parallel", flags["cyclic_parallel"], coefficients=False),
    ]


def _flow_rows(pg: PointGeometry, tol: float, Lambda: float, nu: float) -> list[PropertyRecord]:
    from . import symflow as sf

    spec = pg.geo.spec
    rows = []
    for c in spec.coords:
        xi = sf.VectorFieldSpec.coordinate(spec, c)
        rows.append(record_from_fit(f"killing d/d{c}", sf.killing_check(xi, pg, tol=tol), coefficients=False))
    for c in spec.coords:
        xi = sf.VectorFieldSpec.coordinate(spec, c)
        for kind, label in (("S", "ricci"), ("R13", "curvature (1,3)"), ("R04", "curvature (0,4)")):
            col = sf.inheritance_fit(kind, xi, pg, collineation=True, tol=tol)
            rows.append(record_from_fit(f"{label} collineation d/d{c}", col, coefficients=False))
            inh = sf.inheritance_fit(kind, xi, pg, tol=tol)
            rows.append(record_from_fit(f"{label} inheritance d/d{c}", inh))
        gen = sf.inheritance_fit("R04", xi, pg, generalized=True, tol=tol)
        rows.append(record_from_fit(f"generalized curvature inheritance d/d{c}", gen))
    # solitons along the second coordinate field with eta its dual coordinate 1-form
    c = spec.coords[1]
    xi = sf.VectorFieldSpec.coordinate(spec, c)
    eta = sf.one_form([1 if k == 1 else 0 for k in range(spec.n)])
    for kind in ("eta_ricci", "eta_ricci_yamabe"):
        fit = sf.soliton_fit(kind, xi, pg, eta=eta, tol=tol)
        rec = record_from_fit(f"almost {kind.replace('_', '-')} soliton d/d{c}", fit.fit)
        if rec.verdict == HOLDS and not fit.admits:
            rec.verdict = INCONCLUSIVE
            rec.note = f"fitted scalars are not continuous (probe change {fit.continuity:.2g})"
        rows.append(rec)
    em = sf.em_pseudosymmetry_suite(pg, Lambda=Lambda, nu=nu, tol=tol)
    for key, fit in em.items():
        name = f"energy-momentum {key} = L Q(g,T)" if "." in key else f"energy-momentum {key}"
        rows.append(record_from_fit(name, fit))
    return rows


def _attach_closed_form(rec: PropertyRecord, cf: ClosedForm, pg: PointGeometry) -> None:
    rec.closed_form = cf.expression
    coeffs = [k for k, v in rec.witness.items() if isinstance(v, list) and v and isinstance(v[0], float)]
    key = cf.label or (coeffs[0] if coeffs else None)
    if key is None or key not in rec.witness:
        return
    expected = pg.evaluate(pg.geo.spec.parse(cf.expression))
    got = np.asarray(rec.witness[key])
    den = np.maximum(np.abs(expected), 1e-300)
    rec.closed_form_error = float(np.max(np.abs(got - expected) / den))


def classification_report(
    spec,
    plan=None,
    tol: float = DEPENDENT_TOL,
    closed_forms: dict[str, ClosedForm] | None = None,
    flows: bool = True,
    Lambda: float = 0.0,
    nu: float = 8.0,
) -> ClassificationReport:
    """Run every detector at the plan's sample points and collect one row per property.

    A detector that hits a singular evaluation yields an ``inconclusive``
    row with the error as its note instead of aborting the report.
    """
    from .chart import SamplePlan, sample_points
    from .tensor import Geometry

    plan = plan or SamplePlan()
    points = sample_points(spec, plan)
    pg = Geometry(spec).at(points)
    cx = _Ctx(pg)
    report = ClassificationReport(
        spec.name,
        spec.param_values(),
        plan.seed,
        tol,
        [dict(p.coords) for p in points],
    )
    groups: list[tuple[str, Callable[[], list[PropertyRecord]]]] = [
        ("scalar", lambda: _scalar_rows(pg)),
        ("ricci structure", lambda: _ricci_structure_rows(pg, tol)),
        ("pseudosymmetry", lambda: _pseudo_rows(cx, tol)),
        ("derivatives", lambda: _derivative_rows(pg, tol)),
        ("compatibility", lambda: _compat_rows(pg, tol)),
        ("ricci derivatives", lambda: _ricci_derivative_rows(pg, tol)),
    ]
    if flows:
        groups.append(("flows", lambda: _flow_rows(pg, tol, Lambda, nu)))
    for label, build in groups:
        try:
            rows = build()
        except (ex.SingularEvaluation, np.linalg.LinAlgError) as err:
            rows = [PropertyRecord(f"{label} detectors", INCONCLUSIVE, float("nan"), pg.size, {}, f"skipped: {err}")]
        for rec in rows:
            if closed_forms and rec.name in closed_forms:
                _attach_closed_form(rec, closed_forms[rec.name], pg)
            report.add(rec)
    return report
