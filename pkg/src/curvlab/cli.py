"""Command-line front end.

Exit codes: 0 success, 1 a verified proposition failed, 2 usage or parameter
error, 3 no regular sample points could be drawn.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import expr as ex
from .chart import CATALOG_NAMES, EmptyRegionError, MetricSpecError, SamplePlan, builtin_metric, load_metric, point

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SAMPLING = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_params(text: str | None) -> dict[str, float]:
    """``"m=1,b=0.5"`` -> ``{"m": 1.0, "b": 0.5}``."""
    out: dict[str, float] = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, val = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"bad parameter {item!r}; expected name=value")
        try:
            v = float(val)
        except ValueError:
            raise UsageError(f"parameter {key.strip()!r} needs a number, got {val!r}") from None
        if not math.isfinite(v):
            raise UsageError(f"parameter {key.strip()!r} must be finite")
        out[key.strip()] = v
    return out


def parse_components(text: str | None, n: int | None = None, what: str = "field") -> list[str] | None:
    if text is None:
        return None
    parts = [p.strip() for p in text.split(",")]
    if any(not p for p in parts):
        raise UsageError(f"empty component in {what} {text!r}")
    if n is not None and len(parts) != n:
        raise UsageError(f"{what} needs {n} components, got {len(parts)}")
    return parts


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _finite_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be finite")
    return v


def _common(p: argparse.ArgumentParser, metric: bool = True) -> None:
    if metric:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--metric", default=None, help=f"catalog metric ({', '.join(CATALOG_NAMES)})")
        g.add_argument("--metric-file", default=None, help="YAML or JSON metric specification")
    p.add_argument("--params", default=None, help="parameter overrides, e.g. m=1,b=1")
    p.add_argument("--points", type=_positive_int, default=25, help="number of sample points")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=_positive_float, default=1e-8, help="dependence tolerance")
    p.add_argument("--format", choices=("json", "md"), default="md")
    p.add_argument("--lambda", dest="Lambda", type=_finite_float, default=0.0, help="cosmological constant")
    p.add_argument("--nu", type=_finite_float, default=8.0, help="coupling in T = (S - kappa g/2 + Lambda g)/nu")
    p.add_argument("-o", "--output", default=None, help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvlab", description="Curvature and symmetry analysis of metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="full property report for one metric")
    _common(p)
    p.add_argument("--no-flows", action="store_true", help="skip Killing, inheritance and soliton rows")

    p = sub.add_parser("verify", help="check named identities (exit 1 if any fails)")
    _common(p, metric=False)
    p.add_argument("ids", nargs="*", help="proposition ids, e.g. thm3-i remark-iii")
    p.add_argument("--all", action="store_true", help="run every registered proposition")
    p.add_argument("--list", action="store_true", help="list proposition ids and exit")
    p.add_argument("--brief", action="store_true", help="omit the per-point coefficient tables")

    p = sub.add_parser("soliton", help="fit soliton scalars along a vector field")
    _common(p)
    p.add_argument("--kind", default="eta_ricci_yamabe",
                   choices=("ricci", "eta_ricci", "ricci_yamabe", "eta_ricci_yamabe"))
    p.add_argument("--xi", default=None, help='vector field components, e.g. "0,1,0,0"')
    p.add_argument("--eta", default=None, help='1-form components, e.g. "0,1,0,0"')

    p = sub.add_parser("compare", help="side-by-side verdict table")
    _common(p, metric=False)
    p.add_argument("metrics", nargs="+", help="catalog metric names or metric files")

    p = sub.add_parser("components", help="nonzero components of a tensor")
    _common(p)
    p.add_argument("--tensor", default="riemann",
                   help="g, ginv, christoffel, riemann, ricci, scalar, C, P, W, K, einstein_tensor, 'nabla X'")
    p.add_argument("--at", default=None, help="coordinates, e.g. t=0,r=2,theta=1.5707963,phi=0")
    p.add_argument("--zero-tol", type=float, default=1e-12, help="hide components at most this large")
    return parser


# --------------------------------------------------------------------------


def _load_spec(ref_metric: str | None, ref_file: str | None, params: dict[str, float]):
    if ref_file:
        spec = load_metric(ref_file)
        return spec.with_params(**params) if params else spec
    return builtin_metric(ref_metric or "hayward", params)


def _metric_ref(text: str, params: dict[str, float]):
    if text in CATALOG_NAMES:
        return builtin_metric(text, params)
    if text.endswith((".yaml", ".yml", ".json")):
        spec = load_metric(text)
        return spec.with_params(**params) if params else spec
    raise MetricSpecError(f"unknown metric {text!r}; known: {', '.join(CATALOG_NAMES)}")


def _plan(args) -> SamplePlan:
    return SamplePlan(seed=args.seed, count=args.points)


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_classify(args) -> int:
    from .classify import classification_report
    from .propositions import KNOWN_FORMS

    if args.nu == 0:
        raise UsageError("--nu must be nonzero")
    spec = _load_spec(args.metric, args.metric_file, parse_params(args.params))
    forms = KNOWN_FORMS if spec.name == "hayward" else None
    rep = classification_report(
        spec, _plan(args), tol=args.tol, closed_forms=forms, flows=not args.no_flows, Lambda=args.Lambda, nu=args.nu
    )
    _emit(args, rep.to_json() if args.format == "json" else rep.to_markdown())
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import propositions as P

    if args.list:
        _emit(args, "\n".join(f"{pid}: {prop.statement}" for pid, prop in P.REGISTRY.items()))
        return EXIT_OK
    if args.nu == 0:
        raise UsageError("--nu must be nonzero")
    ids = list(P.REGISTRY) if args.all else list(args.ids)
    if not ids:
        raise UsageError("give proposition ids or --all (see --list)")
    unknown = [i for i in ids if i not in P.REGISTRY]
    if unknown:
        raise UsageError(f"unknown proposition id(s): {', '.join(unknown)}")
    params = parse_params(args.params)
    builtin_metric("hayward", params)  # validate before computing
    ctx = P.VerifyContext(_plan(args), tol=args.tol, params=params, Lambda=args.Lambda, nu=args.nu)
    outcomes = [P.run(pid, ctx) for pid in ids]
    if args.format == "json":
        text = json.dumps([o.to_dict() for o in outcomes], indent=2, allow_nan=False)
    else:
        lines = []
        for o in outcomes:
            lines += o.lines(per_point=not args.brief) + [""]
        passed = sum(o.passed for o in outcomes)
        lines.append(f"{passed}/{len(outcomes)} passed")
        text = "\n".join(lines)
    _emit(args, text)
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_FAIL


def cmd_soliton(args) -> int:
    from . import symflow as sf
    from .chart import sample_points
    from .tensor import Geometry

    spec = _load_spec(args.metric, args.metric_file, parse_params(args.params))
    xi_txt = parse_components(args.xi, spec.n, "--xi")
    if xi_txt is None:
        xi_txt = ["1" if k == 1 else "0" for k in range(spec.n)]
    eta_txt = parse_components(args.eta, spec.n, "--eta")
    if args.kind.startswith("eta") and eta_txt is None:
        eta_txt = ["1" if k == 1 else "0" for k in range(spec.n)]
    try:
        xi = sf.VectorFieldSpec.parse(spec, xi_txt)
        eta = sf.parse_one_form(spec, eta_txt) if eta_txt is not None else None
    except ValueError as err:
        raise UsageError(str(err)) from None
    pg = Geometry(spec).at(sample_points(spec, _plan(args)))
    fit = sf.soliton_fit(args.kind, xi, pg, eta=eta, tol=args.tol)
    d = fit.to_dict()
    d.update({"metric": spec.name, "params": spec.param_values(), "seed": args.seed, "xi": xi_txt,
              "sample": [dict(b.coords) for b in pg.points]})
    if args.format == "json":
        text = json.dumps(d, indent=2, allow_nan=False)
    else:
        lines = [
            f"# {args.kind} soliton on {spec.name}",
            "",
            f"xi = ({', '.join(xi_txt)}); eta = ({', '.join(eta_txt) if eta_txt else '-'}); verdict {d['verdict']}; "
            f"max residual {fit.max_residual:.3g}; continuity {fit.continuity:.3g}",
            "",
            "| point | " + " | ".join(fit.labels) + " | residual |",
            "|---|" + "---|" * (len(fit.labels) + 1),
        ]
        for i in range(pg.size):
            cells = " | ".join(f"{v:.10g}" for v in fit.coefficients[i])
            lines.append(f"| {i} | {cells} | {fit.residuals[i]:.3g} |")
        text = "\n".join(lines) + "\n"
    _emit(args, text)
    return EXIT_OK


def cmd_compare(args) -> int:
    from .classify import classification_report, comparison_markdown, comparison_table

    if len(args.metrics) < 2:
        raise UsageError("compare needs at least two metrics")
    params = parse_params(args.params)
    specs = []
    for name in args.metrics:
        # parameters apply to every metric that has them
        spec = _metric_ref(name, {})
        own = {k: v for k, v in params.items() if k in {p.name for p in spec.params}}
        specs.append(spec.with_params(**own) if own else spec)
    reports = [
        classification_report(s, _plan(args), tol=args.tol, Lambda=args.Lambda, nu=args.nu) for s in specs
    ]
    table = comparison_table(reports)
    if args.format == "json":
        text = json.dumps(table, indent=2)
    else:
        text = comparison_markdown(table)
    _emit(args, text)
    return EXIT_OK


def _parse_at(spec, text: str):
    vals = parse_params(text)
    unknown = set(vals) - set(spec.coords)
    if unknown:
        raise UsageError(f"unknown coordinate(s) {sorted(unknown)} for {spec.name}")
    missing = set(spec.coords) - set(vals)
    if missing:
        raise UsageError(f"--at is missing {sorted(missing)}")
    return point(spec, **vals)


def cmd_components(args) -> int:
    from .chart import sample_points
    from .tensor import Geometry

    spec = _load_spec(args.metric, args.metric_file, parse_params(args.params))
    geo = Geometry(spec)
    pts = [_parse_at(spec, args.at)] if args.at else sample_points(spec, _plan(args))
    pg = geo.at(pts)
    name = args.tensor
    if name == "scalar":
        vals = np.asarray(pg.scalar, dtype=float).reshape(pg.size, 1)
        labels = ["kappa"]
    else:
        try:
            T = pg.symbolic(name)
        except (ValueError, AttributeError, KeyError):
            raise UsageError(f"unknown tensor {name!r}") from None
        arr = np.asarray(pg.evaluate(T).data, dtype=float).reshape((pg.size,) + T.data.shape)
        labels = ["".join(str(i + 1) for i in idx) for idx in np.ndindex(arr.shape[1:])]
        vals = arr.reshape(pg.size, -1)
    keep = [j for j in range(vals.shape[1]) if np.max(np.abs(vals[:, j])) > args.zero_tol]
    if args.format == "json":
        doc = {
            "metric": spec.name,
            "params": spec.param_values(),
            "tensor": name,
            "points": [dict(b.coords) for b in pg.points],
            "components": {labels[j]: vals[:, j].tolist() for j in keep},
        }
        text = json.dumps(doc, indent=2, allow_nan=False)
    else:
        lines = []
        for i, b in enumerate(pg.points):
            where = ", ".join(f"{c}={v:.10g}" for c, v in b.coords.items())
            lines.append(f"## point {i}: {where}")
            lines += [f"{name}[{labels[j]}] = {vals[i, j]:.15g}" for j in keep]
            lines.append("")
        text = "\n".join(lines)
    _emit(args, text)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "verify": cmd_verify,
    "soliton": cmd_soliton,
    "compare": cmd_compare,
    "components": cmd_components,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, MetricSpecError, ex.ExprSyntaxError, ex.UnknownSymbolError) as err:
        print(f"curvlab: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (EmptyRegionError, ex.SingularEvaluation) as err:
        print(f"curvlab: sampling failed: {err}", file=sys.stderr)
        return EXIT_SAMPLING
    except OSError as err:
        print(f"curvlab: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
