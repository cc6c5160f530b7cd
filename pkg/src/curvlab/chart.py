"""Coordinate charts, metric specifications, the built-in catalog and point sampling."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .expr import Binding, Expr, Program, SingularEvaluation, parse_expr, symbol_table


class MetricSpecError(ValueError):
    """Schema violation, bad parameter value or asymmetric metric input."""


class EmptyRegionError(RuntimeError):
    """The sampling region admits no (or not enough) regular points."""


@dataclass(frozen=True)
class Chart:
    coords: tuple[str, ...]
    signature: tuple[int, ...]

    def __post_init__(self):
        if len(self.coords) < 3:
            raise MetricSpecError("charts need dimension n >= 3")
        if len(set(self.coords)) != len(self.coords):
            raise MetricSpecError("coordinate names must be distinct")
        if len(self.signature) != len(self.coords):
            raise MetricSpecError("signature length must equal the number of coordinates")
        if any(s not in (-1, 1) for s in self.signature):
            raise MetricSpecError("signature entries must be +1 or -1")

    @property
    def n(self) -> int:
        return len(self.coords)


_CONSTRAINT = re.compile(r"^\s*(>=|<=|>|<|!=)\s*([-+]?[0-9.eE+-]+)\s*$")


@dataclass(frozen=True)
class Param:
    """A metric parameter; ``constraint`` is e.g. ``"> 0"`` or ``"> 0, < 1"``."""

    name: str
    default: float
    constraint: str = ""

    def check(self, value: float) -> None:
        if not math.isfinite(value):
            raise MetricSpecError(f"parameter {self.name} must be finite")
        for clause in filter(None, (c.strip() for c in self.constraint.split(","))):
            m = _CONSTRAINT.match(clause)
            if not m:
                raise MetricSpecError(f"bad constraint {clause!r} on {self.name}")
            op, bound = m.group(1), float(m.group(2))
            ok = {
                ">": value > bound,
                ">=": value >= bound,
                "<": value < bound,
                "<=": value <= bound,
                "!=": value != bound,
            }[op]
            if not ok:
                raise MetricSpecError(f"parameter {self.name}={value} violates constraint {clause!r}")


@dataclass(frozen=True)
class MetricSpec:
    """A metric on a chart: symbolic components, parameters and regularity guards.

    ``g`` is a full symmetric n x n tuple of tuples; it is built from the
    upper triangle only, so symmetry holds by construction.
    """

    name: str
    chart: Chart
    g: tuple[tuple[Expr, ...], ...]
    params: tuple[Param, ...] = ()
    values: Mapping[str, float] = field(default_factory=dict)
    guards: tuple[Expr, ...] = ()
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def coords(self) -> tuple[str, ...]:
        return self.chart.coords

    def param_values(self) -> dict[str, float]:
        out = {p.name: float(p.default) for p in self.params}
        out.update(self.values)
        return out

    def with_params(self, **values: float) -> MetricSpec:
        known = {p.name: p for p in self.params}
        merged = dict(self.values)
        for k, v in values.items():
            if k not in known:
                raise MetricSpecError(f"metric {self.name} has no parameter {k!r}")
            v = float(v)
            known[k].check(v)
            merged[k] = v
        return replace(self, values=merged)

    def binding(self, **coords: float) -> Binding:
        return Binding(dict(coords), self.param_values())

    def symbols(self) -> dict[str, Expr]:
        return symbol_table(self.chart.coords, [p.name for p in self.params])

    def parse(self, text: str) -> Expr:
        return parse_expr(text, self.symbols())


def _build(name, coords, signature, comps: Mapping[tuple[int, int], str], params=(), guards=(), ranges=None, values=None) -> MetricSpec:
    chart = Chart(tuple(coords), tuple(int(s) for s in signature))
    params = tuple(params)
    table = symbol_table(chart.coords, [p.name for p in params])
    n = chart.n
    rows: list[list[Expr | None]] = [[None] * n for _ in range(n)]
    zero = parse_expr("0", table)
    for (i, j), text in comps.items():
        if not (1 <= i <= n and 1 <= j <= n):
            raise MetricSpecError(f"component index {i},{j} out of range")
        e = parse_expr(str(text), table)
        a, b = i - 1, j - 1
        if rows[a][b] is not None and rows[a][b] is not e:
            raise MetricSpecError(f"metric component {j},{i} does not equal {i},{j}")
        rows[a][b] = rows[b][a] = e
    g = tuple(tuple(rows[i][j] if rows[i][j] is not None else zero for j in range(n)) for i in range(n))
    guard_exprs = tuple(parse_expr(str(t), table) for t in guards)
    spec = MetricSpec(name, chart, g, params, {}, guard_exprs, dict(ranges or {}))
    for p in params:
        p.check(float(p.default))
    return spec.with_params(**(values or {}))


# --------------------------------------------------------------------------
# spec files

_REQUIRED = ("name", "coords", "signature", "g")


def metric_from_dict(doc: Mapping) -> MetricSpec:
    """Build a MetricSpec from a parsed metric document (see README for the schema)."""
    if not isinstance(doc, Mapping):
        raise MetricSpecError("metric document must be a mapping")
    for key in _REQUIRED:
        if key not in doc:
            raise MetricSpecError(f"missing field {key!r}")
    coords = doc["coords"]
    if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
        raise MetricSpecError("'coords' must be a list of names")
    signature = doc["signature"]
    if isinstance(signature, str):
        signature = [-1 if ch == "-" else 1 for ch in signature if ch in "+-"]
    if not isinstance(signature, list):
        raise MetricSpecError("'signature' must be a list of +1/-1 or a string like '-+++'")
    params = []
    for p in doc.get("params", []) or []:
        if not isinstance(p, Mapping) or "name" not in p or "default" not in p:
            raise MetricSpecError("each param needs 'name' and 'default'")
        params.append(Param(str(p["name"]), float(p["default"]), str(p.get("constraint", "") or "")))
    comps: dict[tuple[int, int], str] = {}
    gdoc = doc["g"]
    if not isinstance(gdoc, Mapping):
        raise MetricSpecError("'g' must map 'i,j' to expressions")
    for key, text in gdoc.items():
        m = re.fullmatch(r"\s*(\d+)\s*,\s*(\d+)\s*", str(key))
        if not m:
            raise MetricSpecError(f"bad component key {key!r}")
        i, j = int(m.group(1)), int(m.group(2))
        if (j, i) in comps and i != j:
            raise MetricSpecError(f"components {i},{j} and {j},{i} both given; store only i<=j")
        if i > j:
            raise MetricSpecError(f"component key {key!r} must have i <= j")
        comps[(i, j)] = str(text)
    ranges = {}
    for c, rng in (doc.get("ranges") or {}).items():
        if c not in coords or not isinstance(rng, (list, tuple)) or len(rng) != 2:
            raise MetricSpecError(f"bad range for {c!r}")
        ranges[c] = (float(rng[0]), float(rng[1]))
    try:
        return _build(str(doc["name"]), coords, signature, comps, params, doc.get("guards", []) or [], ranges)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, MetricSpecError):
            raise
        raise MetricSpecError(str(exc)) from exc


def load_metric(path: str | Path) -> MetricSpec:
    """Load a metric spec file (YAML or JSON)."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise MetricSpecError(f"cannot parse {path}: {exc}") from exc
    return metric_from_dict(doc)


def metric_to_dict(spec: MetricSpec) -> dict:
    """Inverse of :func:`metric_from_dict` (expressions printed in the parser grammar)."""
    n = spec.n
    return {
        "name": spec.name,
        "coords": list(spec.coords),
        "signature": list(spec.chart.signature),
        "params": [{"name": p.name, "default": spec.param_values()[p.name], "constraint": p.constraint} for p in spec.params],
        "g": {f"{i + 1},{j + 1}": str(spec.g[i][j]) for i in range(n) for j in range(i, n) if not spec.g[i][j].is_zero},
        "guards": [str(e) for e in spec.guards],
        "ranges": {k: list(v) for k, v in spec.ranges.items()},
    }


# --------------------------------------------------------------------------
# catalog

_SPHERICAL = ("t", "r", "theta", "phi")
_LORENTZ = (-1, 1, 1, 1)
_ANGLES = {"t": (-10.0, 10.0), "theta": (0.1, math.pi - 0.1), "phi": (0.0, 2 * math.pi)}


def _static_spherical(name: str, f: str, params, guards, r_range, values) -> MetricSpec:
    comps = {(1, 1): f"-({f})", (2, 2): f"1/({f})", (3, 3): "r^2", (4, 4): "r^2*sin(theta)^2"}
    return _build(name, _SPHERICAL, _LORENTZ, comps, params, ["r", "sin(theta)", f, *guards], {**_ANGLES, "r": r_range}, values)


def _hayward(values):
    return _static_spherical(
        "hayward",
        "1 - 2*m*r^2/(r^3 + 2*m*b^2)",
        [Param("m", 1.0, "> 0"), Param("b", 1.0, ">= 0")],
        ["2*b^2*m + r^2*(r - 2*m)", "2*b^2*m + r^3", "4*b^2*m - r^3"],
        (0.5, 5.0),
        values,
    )


def _schwarzschild(values):
    return _static_spherical("schwarzschild", "1 - 2*m/r", [Param("m", 1.0, "> 0")], [], (2.5, 8.0), values)


def _reissner_nordstrom(values):
    return _static_spherical(
        "reissner_nordstrom",
        "1 - 2*m/r + q^2/r^2",
        [Param("m", 1.0, "> 0"), Param("q", 0.5, ">= 0")],
        [],
        (2.5, 8.0),
        values,
    )


def _global_monopole(values):
    comps = {(1, 1): "-1", (2, 2): "1/alpha^2", (3, 3): "r^2", (4, 4): "r^2*sin(theta)^2"}
    return _build(
        "global_monopole",
        _SPHERICAL,
        _LORENTZ,
        comps,
        [Param("alpha", 0.5, "> 0, < 1")],
        ["r", "sin(theta)"],
        {**_ANGLES, "r": (0.5, 5.0)},
        values,
    )


def _minkowski(values):
    comps = {(1, 1): "-1", (2, 2): "1", (3, 3): "r^2", (4, 4): "r^2*sin(theta)^2"}
    return _build("minkowski_spherical", _SPHERICAL, _LORENTZ, comps, [], ["r", "sin(theta)"], {**_ANGLES, "r": (0.5, 5.0)}, values)


_CATALOG = {
    "hayward": _hayward,
    "schwarzschild": _schwarzschild,
    "reissner_nordstrom": _reissner_nordstrom,
    "global_monopole": _global_monopole,
    "minkowski_spherical": _minkowski,
}

CATALOG_NAMES = tuple(_CATALOG)


def builtin_metric(name: str, params: Mapping[str, float] | None = None) -> MetricSpec:
    """Catalog metric by name, with optional parameter overrides."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise MetricSpecError(f"unknown metric {name!r}; known: {', '.join(CATALOG_NAMES)}") from None
    return factory(dict(params or {}))


# --------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplePlan:
    """How to draw regular points: seed, count, coordinate ranges and extra guards.

    ``ranges`` overrides the metric's default ranges per coordinate; a guard
    expression rejects a point when its absolute value is at most ``guard_tol``.
    """

    seed: int = 42
    count: int = 25
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    guards: tuple[Expr, ...] = ()
    guard_tol: float = 1e-6
    max_draws: int = 200_000


def _resolve_ranges(spec: MetricSpec, plan: SamplePlan) -> list[tuple[float, float]]:
    out = []
    for c in spec.coords:
        lo, hi = plan.ranges.get(c, spec.ranges.get(c, (-1.0, 1.0)))
        if not (hi > lo):
            raise EmptyRegionError(f"empty range for {c}: ({lo}, {hi})")
        out.append((float(lo), float(hi)))
    return out


def _signature_ok(spec: MetricSpec, cols: dict[str, np.ndarray], size: int) -> np.ndarray:
    n = spec.n
    flat = [spec.g[i][j] for i in range(n) for j in range(n)]
    try:
        vals = Program(flat).run(cols)
    except SingularEvaluation:
        return np.zeros(size, dtype=bool)
    mats = np.stack([np.broadcast_to(np.asarray(v, dtype=float), (size,)) for v in vals], axis=-1).reshape(size, n, n)
    eig = np.linalg.eigvalsh(mats)
    want = np.sort(np.array(spec.chart.signature))
    return np.all(np.sign(eig) == want, axis=1) & np.all(np.abs(eig) > 1e-12, axis=1)


def sample_points(spec: MetricSpec, plan: SamplePlan) -> list[Binding]:
    """Deterministic rejection sampling of regular points."""
    if plan.count < 0:
        raise ValueError("count must be non-negative")
    ranges = _resolve_ranges(spec, plan)
    if plan.count == 0:
        return []
    rng = np.random.default_rng(plan.seed)
    pvals = spec.param_values()
    guards = list(spec.guards) + list(plan.guards)
    accepted: list[Binding] = []
    drawn = 0
    batch = max(64, 2 * plan.count)
    while len(accepted) < plan.count and drawn < plan.max_draws:
        raw = np.column_stack([rng.uniform(lo, hi, batch) for lo, hi in ranges])
        drawn += batch
        cols = {c: raw[:, k] for k, c in enumerate(spec.coords)}
        cols.update({k: float(v) for k, v in pvals.items()})
        ok = np.ones(batch, dtype=bool)
        for gexpr in guards:
            try:
                (val,) = Program([gexpr]).run(cols)
            except SingularEvaluation as exc:
                ok[list(exc.points)] = False
                # re-evaluate point by point to isolate the survivors
                for i in np.flatnonzero(ok):
                    try:
                        (v,) = Program([gexpr]).run({k: (a[i] if isinstance(a, np.ndarray) else a) for k, a in cols.items()})
                    except SingularEvaluation:
                        ok[i] = False
                        continue
                    ok[i] &= abs(v) > plan.guard_tol
                continue
            ok &= np.abs(np.broadcast_to(val, (batch,))) > plan.guard_tol
        ok &= _signature_ok(spec, cols, batch)
        for i in np.flatnonzero(ok):
            accepted.append(Binding({c: float(raw[i, k]) for k, c in enumerate(spec.coords)}, dict(pvals)))
            if len(accepted) == plan.count:
                break
    if len(accepted) < plan.count:
        raise EmptyRegionError(f"found only {len(accepted)} of {plan.count} regular points")
    return accepted


def point(spec: MetricSpec, **coords: float) -> Binding:
    """A single binding at explicit coordinates with the spec's parameter values."""
    missing = set(spec.coords) - set(coords)
    if missing:
        raise ValueError(f"missing coordinates: {sorted(missing)}")
    return Binding({c: float(coords[c]) for c in spec.coords}, spec.param_values())
