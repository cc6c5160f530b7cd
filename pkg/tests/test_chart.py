from __future__ import annotations

import json
import math

import numpy as np
import pytest
import yaml

from curvlab import expr as ex
from curvlab.chart import (
    CATALOG_NAMES,
    EmptyRegionError,
    MetricSpecError,
    SamplePlan,
    builtin_metric,
    load_metric,
    metric_from_dict,
    metric_to_dict,
    point,
    sample_points,
)

HAYWARD_DOC = {
    "name": "hayward_file",
    "coords": ["t", "r", "theta", "phi"],
    "signature": "-+++",
    "params": [{"name": "m", "default": 1.0, "constraint": "> 0"}, {"name": "b", "default": 1.0, "constraint": ">= 0"}],
    "g": {
        "1,1": "-(1 - 2*m*r^2/(r^3 + 2*m*b^2))",
        "2,2": "1/(1 - 2*m*r^2/(r^3 + 2*m*b^2))",
        "3,3": "r^2",
        "4,4": "r^2*sin(theta)^2",
    },
    "guards": ["r", "sin(theta)"],
    "ranges": {"r": [0.5, 5.0], "theta": [0.1, 3.0]},
}


def gvals(spec, **coords):
    bnd = point(spec, **coords)
    return np.array([[ex.evaluate(spec.g[i][j], bnd) for j in range(spec.n)] for i in range(spec.n)])


def test_builtin_hayward_at_reference_point():
    G = gvals(builtin_metric("hayward"), t=0, r=2, theta=math.pi / 2, phi=0)
    assert np.allclose(np.diag(G), [-0.2, 5.0, 4.0, 4.0], rtol=1e-14)
    assert np.count_nonzero(G - np.diag(np.diag(G))) == 0


@pytest.mark.parametrize("suffix", ["yaml", "json"])
def test_metric_file_round_trip(tmp_path, suffix):
    path = tmp_path / f"h.{suffix}"
    path.write_text(yaml.safe_dump(HAYWARD_DOC) if suffix == "yaml" else json.dumps(HAYWARD_DOC))
    spec = load_metric(path)
    ref = builtin_metric("hayward")
    rng = np.random.default_rng(3)
    for _ in range(20):
        c = dict(t=0.0, r=rng.uniform(0.5, 5), theta=rng.uniform(0.1, 3), phi=0.0)
        assert np.allclose(gvals(spec, **c), gvals(ref, **c), rtol=1e-14)
    again = metric_from_dict(metric_to_dict(spec))
    assert again.g == spec.g and again.params == spec.params


def test_signature_string_and_minkowski():
    spec = builtin_metric("minkowski_spherical")
    assert spec.chart.signature == (-1, 1, 1, 1)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["g"].update({"2,1": "1"}),
        lambda d: d["g"].update({"1,2": "r", "2,1": "r"}),
        lambda d: d.pop("coords"),
        lambda d: d.update(coords=["t", "t", "x", "y"]),
        lambda d: d.update(signature=[-1, 1, 1]),
        lambda d: d["g"].update({"1,1": "foo*r"}),
        lambda d: d["g"].update({"x,y": "1"}),
    ],
)
def test_invalid_documents_rejected(mutate):
    doc = json.loads(json.dumps(HAYWARD_DOC))
    mutate(doc)
    with pytest.raises(MetricSpecError):
        metric_from_dict(doc)


def test_parameter_constraints():
    with pytest.raises(MetricSpecError):
        builtin_metric("hayward").with_params(m=-1)
    with pytest.raises(MetricSpecError):
        builtin_metric("hayward").with_params(q=1)
    with pytest.raises(MetricSpecError):
        builtin_metric("global_monopole", {"alpha": 1.5})
    assert builtin_metric("hayward").with_params(b=0).param_values() == {"m": 1.0, "b": 0.0}


def test_unknown_metric():
    with pytest.raises(MetricSpecError):
        builtin_metric("kerr")


def test_hayward_b0_equals_schwarzschild():
    h, s = builtin_metric("hayward", {"b": 0.0}), builtin_metric("schwarzschild")
    for bnd in sample_points(s, SamplePlan(seed=1, count=50)):
        c = bnd.coords
        assert np.allclose(gvals(h, **c), gvals(s, **c), rtol=1e-14, atol=0)


def test_sampling_is_seeded_and_regular():
    spec = builtin_metric("hayward")
    pts = sample_points(spec, SamplePlan(seed=42, count=10))
    assert len(pts) == 10
    assert pts == sample_points(spec, SamplePlan(seed=42, count=10))
    assert pts != sample_points(spec, SamplePlan(seed=7, count=10))
    B = [2 + p.coords["r"] ** 2 * (p.coords["r"] - 2) for p in pts]
    assert min(B) > 0


def test_hayward_B_has_positive_minimum():
    # B(r) = 2 + r^2 (r - 2) at m = b = 1: stationary at r = 4/3 with value 22/27
    r = np.linspace(0.0, 10.0, 200001)
    B = 2 + r**2 * (r - 2)
    assert B.min() == pytest.approx(22 / 27, rel=1e-8)


def test_sampling_edge_cases():
    spec = builtin_metric("hayward")
    assert sample_points(spec, SamplePlan(count=0)) == []
    with pytest.raises(EmptyRegionError):
        sample_points(spec, SamplePlan(count=3, ranges={"r": (0.0, 0.0)}))
    guard = spec.parse("r - 1")
    with pytest.raises(EmptyRegionError):
        sample_points(spec, SamplePlan(count=3, ranges={"r": (1.0 - 1e-9, 1.0 + 1e-9)}, guards=(guard,), max_draws=2000))


def test_signature_check_rejects_mismatched_metric():
    doc = json.loads(json.dumps(HAYWARD_DOC))
    doc["signature"] = "++++"
    with pytest.raises(EmptyRegionError):
        sample_points(metric_from_dict(doc), SamplePlan(count=2, max_draws=1000))


def test_catalog_complete():
    assert set(CATALOG_NAMES) == {"hayward", "schwarzschild", "reissner_nordstrom", "global_monopole", "minkowski_spherical"}
    for name in CATALOG_NAMES:
        assert len(sample_points(builtin_metric(name), SamplePlan(count=5))) == 5


def test_point_requires_all_coordinates():
    with pytest.raises(ValueError):
        point(builtin_metric("hayward"), r=2.0)
