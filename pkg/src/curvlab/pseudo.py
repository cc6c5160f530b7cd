"""Dot action T.H, Tachibana tensors Q(Z,H) and per-point linear-dependence fits."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor, _ein, _exprs, _lift

_L = string.ascii_lowercase[:8]

DEPENDENT_TOL = 1e-8
INDEPENDENT_TOL = 1e-4
RANK_RTOL = 1e-8
# residual denominators are floored at this multiple of the round-off magnitude
ROUNDOFF_FLOOR = 1e-6


def _check_k(H: Tensor) -> int:
    k = H.rank
    if k not in (2, 4) or set(H.positions) != {"d"}:
        raise ValueError(f"only (0,2) and (0,4) tensors are supported, got {H.positions}")
    return k


def dot_action(T: Tensor, H: Tensor, ginv: Tensor) -> Tensor:
    """(T.H)_{q1..qk m n} = -sum_s g^{pr} T_{m n q_s r} H_{q1..p..qk}.

    The curvature endomorphism of T acts as a derivation on H; the two
    trailing slots carry the endomorphism's arguments.
    """
    if T.positions != "dddd":
        raise ValueError("dot_action needs a (0,4) tensor T")
    k = _check_k(H)
    t, h, gi = _lift(T, H), _lift(H, T), ginv.data
    if (T.batched or H.batched) and not ginv.batched:
        gi = gi[None, ...]
    L = _L[:k]
    out = None
    for s in range(k):
        hidx = L[:s] + "p" + L[s + 1 :]
        term = _ein(f"pr,mn{L[s]}r,{hidx}->{L}mn", gi, t, h)
        out = -term if out is None else out - term
    if out.dtype == object:
        out = _exprs(out)
    return Tensor(out, "d" * (k + 2), f"{T.name}.{H.name}")


def tachibana(Z: Tensor, H: Tensor) -> Tensor:
    """Q(Z,H)_{q1..qk m n} = sum_s Z_{m q_s} H_{..n..} - Z_{n q_s} H_{..m..}."""
    if Z.positions != "dd":
        raise ValueError("Z must be a (0,2) tensor")
    k = _check_k(H)
    z, h = _lift(Z, H), _lift(H, Z)
    L = _L[:k]
    out = None
    for s in range(k):
        hn = L[:s] + "n" + L[s + 1 :]
        hm = L[:s] + "m" + L[s + 1 :]
        term = _ein(f"m{L[s]},{hn}->{L}mn", z, h) - _ein(f"n{L[s]},{hm}->{L}mn", z, h)
        out = term if out is None else out + term
    if out.dtype == object:
        out = _exprs(out)
    return Tensor(out, "d" * (k + 2), f"Q({Z.name},{H.name})")


# --------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class FitResult:
    """Per-point least-squares coefficients and relative residuals.

    ``residuals[i] = |LHS - sum c_j RHS_j|_inf / max(|LHS|_inf, |sum c_j RHS_j|_inf, scale)``
    at point ``i``. A point is *dependent* when its residual is at most
    ``tol``, *independent* when at least ``independent_tol``, and
    *inconclusive* in between.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    ranks: np.ndarray
    labels: tuple[str, ...] = ()
    tol: float = DEPENDENT_TOL
    independent_tol: float = INDEPENDENT_TOL
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def points(self) -> int:
        return int(self.residuals.shape[0])

    def point_verdicts(self) -> list[str]:
        out = []
        for r in self.residuals:
            if r <= self.tol:
                out.append("dependent")
            elif r >= self.independent_tol:
                out.append("independent")
            else:
                out.append("inconclusive")
        return out

    @property
    def verdict(self) -> str:
        """``dependent`` if every point is; ``independent`` if some point is."""
        v = self.point_verdicts()
        if v and all(x == "dependent" for x in v):
            return "dependent"
        if any(x == "independent" for x in v):
            return "independent"
        return "inconclusive"

    @property
    def holds(self) -> bool:
        return self.verdict == "dependent"

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0

    @property
    def min_residual(self) -> float:
        return float(self.residuals.min()) if self.residuals.size else 0.0

    @property
    def fraction_independent(self) -> float:
        if not self.residuals.size:
            return 0.0
        return float(np.mean(self.residuals >= self.independent_tol))

    @property
    def indeterminate(self) -> np.ndarray:
        """Points where the basis has lower rank than its size."""
        return self.ranks < self.coefficients.shape[1]

    def coefficient(self, j: int = 0) -> np.ndarray:
        return self.coefficients[:, j]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "coefficients": self.coefficients.tolist(),
            "residuals": self.residuals.tolist(),
            "ranks": self.ranks.tolist(),
            "verdict": self.verdict,
        }


def _as_batched(T) -> np.ndarray:
    if isinstance(T, Tensor):
        if T.symbolic:
            raise ValueError("fits need evaluated tensors")
        d = T.data if T.batched else T.data[None, ...]
        return d.reshape(d.shape[0], -1)
    a = np.asarray(T, dtype=float)
    return a.reshape(a.shape[0], -1)


def _scale_vec(scale, size: int) -> np.ndarray:
    if scale is None:
        return np.zeros(size)
    return np.broadcast_to(np.asarray(scale, dtype=float), (size,))


def _floor_vec(scale, size: int) -> np.ndarray:
    return ROUNDOFF_FLOOR * _scale_vec(scale, size)


def fit_combo(
    lhs,
    basis: Sequence,
    scale=None,
    labels: Sequence[str] = (),
    tol: float = DEPENDENT_TOL,
    rank_rtol: float = RANK_RTOL,
    basis_scale: Sequence | None = None,
) -> FitResult:
    """Per-point least squares for ``lhs = sum_j c_j basis_j``.

    Columns are normalised before solving; singular values below
    ``rank_rtol * sigma_max`` are dropped, giving the minimum-norm solution
    and the reported rank. ``scale`` (scalar or per point) is the round-off
    magnitude of the left-hand side; ``ROUNDOFF_FLOOR * scale`` floors the
    residual denominator so that round-off on a vanishing left-hand side is
    not mistaken for independence. ``basis_scale`` gives the magnitude of
    each basis tensor: a column no larger than ``rank_rtol`` times it is
    treated as zero.
    """
    L = _as_batched(lhs)
    N = L.shape[0]
    if not len(basis):
        raise ValueError("fit_combo needs a non-empty basis")
    cols = [_as_batched(b) for b in basis]
    for c in cols:
        if c.shape != L.shape:
            raise ValueError(f"valence mismatch: {c.shape} vs {L.shape}")
    A = np.stack(cols, axis=-1)  # (N, M, k)
    k = A.shape[-1]
    coef = np.zeros((N, k))
    ranks = np.zeros(N, dtype=int)
    res = np.zeros(N)
    floor = _floor_vec(scale, N)
    bfloor = np.zeros((N, k))
    if basis_scale is not None:
        if len(basis_scale) != k:
            raise ValueError("basis_scale needs one entry per basis tensor")
        bfloor = np.stack([_scale_vec(b, N) for b in basis_scale], axis=1)
    for i in range(N):
        Ai, Li = A[i], L[i]
        norms = np.abs(Ai).max(axis=0)
        live = norms > rank_rtol * bfloor[i]
        c = np.zeros(k)
        if live.any():
            An = Ai[:, live] / norms[live]
            U, s, Vt = np.linalg.svd(An, full_matrices=False)
            keep = s > rank_rtol * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
            ranks[i] = int(keep.sum())
            if ranks[i]:
                y = (U[:, keep].T @ Li) / s[keep]
                c[live] = (Vt[keep].T @ y) / norms[live]
        fitted = Ai @ c
        num = np.abs(Li - fitted).max()
        den = max(np.abs(Li).max(), np.abs(fitted).max(), floor[i])
        res[i] = 0.0 if den == 0 else num / den
        coef[i] = c
    return FitResult(coef, res, ranks, tuple(labels), tol)


def fit_scalar(lhs, rhs, scale=None, label: str = "c", tol: float = DEPENDENT_TOL) -> FitResult:
    """Per-point scalar ``c`` with ``lhs = c * rhs``."""
    return fit_combo(lhs, [rhs], scale=scale, labels=(label,), tol=tol)


def vanishing(T, scale=None, tol: float = DEPENDENT_TOL) -> FitResult:
    """Residual of ``T = 0`` relative to ``max(|T|, ROUNDOFF_FLOOR * scale)`` at each point.

    A genuinely nonzero ``T`` scores 1; pure round-off scores far below ``tol``.
    """
    L = _as_batched(T)
    N = L.shape[0]
    floor = _floor_vec(scale, N)
    num = np.abs(L).max(axis=1)
    den = np.maximum(num, floor)
    res = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return FitResult(np.zeros((N, 0)), res, np.zeros(N, dtype=int), (), tol)


def norm_inf(T) -> np.ndarray:
    """Per-point sup norm of an evaluated tensor."""
    return np.abs(_as_batched(T)).max(axis=1)


def product_scale(*tensors, factor: float = 1.0) -> np.ndarray:
    """Per-point product of sup norms: the natural magnitude of a bilinear expression."""
    out = None
    for T in tensors:
        v = norm_inf(T)
        out = v if out is None else out * v
    return factor * out
