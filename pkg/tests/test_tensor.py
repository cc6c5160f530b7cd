from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
import sympy as sp

import sympy_oracle as so
from curvlab.chart import SamplePlan, builtin_metric, point, sample_points
from curvlab.pseudo import tachibana
from curvlab.tensor import (
    Geometry,
    Tensor,
    contract,
    kulkarni_nomizu,
    lower_index,
    raise_index,
    ricci_power,
    symmetry_residuals,
)


@pytest.mark.parametrize(
    "what, idx, expected",
    [
        ("christoffel", (2, 3, 3), -0.4),
        ("christoffel", (1, 1, 2), 0.4),
        ("riemann", (3, 4, 3, 4), 3.2),
        ("ricci", (3, 3), -0.48),
        ("conformal", (1, 2, 1, 2), -0.064),
        ("concircular", (1, 2, 1, 2), 0.08),
        ("gg", (1, 2, 1, 2), 2.0),
        ("gS", (1, 2, 1, 2), 0.336),
        ("nabla_riemann", (2, 3, 2, 3, 2), -0.48),
    ],
)
def test_reference_point_values(pstar, what, idx, expected):
    assert getattr(pstar, what).comp(*idx)[0] == pytest.approx(expected, rel=1e-12)


def test_reference_point_scalars(pstar):
    assert pstar.scalar[0] == pytest.approx(0.096, rel=1e-12)
    assert pstar.nabla("C").comp(2, 3, 3, 4, 4)[0] == pytest.approx(0.768, rel=1e-12)
    J = pstar.ricci_operator
    assert contract(J, 1, 2)[0] == pytest.approx(0.096, rel=1e-12)
    assert contract(pstar.g, 1, 2, pstar.ginv)[0] == pytest.approx(4.0)
    assert pstar.ricci_power(2).comp(3, 3)[0] == pytest.approx(0.0576, rel=1e-12)


def _oracle_points(spec, count=3, seed=5):
    return sample_points(spec, SamplePlan(seed=seed, count=count))


def _subs(bnd, params):
    v = bnd.values()
    out = {so.r: v["r"], so.theta: v["theta"], so.t: v["t"], so.phi: v["phi"]}
    out.update({getattr(so, k): v[k] for k in params})
    return out


ORACLE_METRICS = {
    "hayward": (so.hayward_metric, ("m", "b")),
    "reissner_nordstrom": (lambda: so.static_spherical(1 - 2 * so.m / so.r + so.q**2 / so.r**2), ("m", "q")),
}


@pytest.fixture(scope="module", params=sorted(ORACLE_METRICS))
def oracle_case(request):
    build, params = ORACLE_METRICS[request.param]
    geo = Geometry(builtin_metric(request.param))
    pts = _oracle_points(geo.spec)
    return so.Oracle(build()), geo.at(pts), [_subs(p, params) for p in pts]


@pytest.mark.parametrize("kind", ["R", "C", "W", "K", "P"])
def test_curvature_matches_sympy_oracle(oracle_case, kind):
    orc, pg, subs = oracle_case
    want_dict = orc.curvature(kind)
    got = pg.curvature(kind).data
    for k, vals in enumerate(subs):
        want = so.to_array(want_dict, 4, 4, vals)
        assert np.allclose(got[k], want, rtol=1e-10, atol=1e-12 * np.abs(want).max())


def test_christoffel_and_ricci_match_oracle(oracle_case):
    orc, pg, subs = oracle_case
    for k, vals in enumerate(subs):
        G = np.array([[[so.numeric(orc.gamma[a, i, j], vals) for j in range(4)] for i in range(4)] for a in range(4)])
        S = so.to_array(orc.ricci, 2, 4, vals)
        assert np.allclose(pg.christoffel.data[k], G, rtol=1e-12, atol=1e-14)
        assert np.allclose(pg.ricci.data[k], S, rtol=1e-10, atol=1e-14)
        assert pg.scalar[k] == pytest.approx(so.numeric(orc.scalar, vals), rel=1e-10, abs=1e-14)


def test_nabla_riemann_matches_oracle_on_components(oracle_case):
    orc, pg, subs = oracle_case
    rng = np.random.default_rng(0)
    idxs = [tuple(int(x) for x in rng.integers(0, 4, 5)) for _ in range(25)]
    idxs += [(0, 1, 0, 1, 1), (0, 1, 0, 2, 2), (1, 2, 2, 3, 3), (2, 3, 2, 3, 1)]
    for k, vals in enumerate(subs[:2]):
        for idx in idxs:
            want = so.numeric(orc.covariant(orc.riemann, 4, idx[:4], idx[4]), vals)
            assert pg.nabla_riemann.data[(k,) + idx] == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_minkowski_flat(catalog):
    geo = catalog["minkowski_spherical"]
    pg = geo.at(sample_points(geo.spec, SamplePlan(count=20)))
    for T in (pg.riemann, pg.ricci, pg.conformal, pg.nabla_riemann):
        assert np.abs(T.data).max() <= 1e-13
    assert np.abs(pg.scalar).max() <= 1e-13


def test_hayward_b0_ricci_flat():
    geo = Geometry(builtin_metric("hayward", {"b": 0.0}))
    pg = geo.at(sample_points(geo.spec, SamplePlan(count=20, ranges={"r": (2.5, 8.0)})))
    scale = np.abs(pg.riemann.data).max()
    assert np.abs(pg.ricci.data).max() <= 1e-10 * scale


def test_ricci_scales_like_b_squared():
    vals = []
    for bv in (1e-2, 1e-3):
        geo = Geometry(builtin_metric("hayward", {"b": bv}))
        pg = geo.at([point(geo.spec, t=0, r=3.0, theta=1.0, phi=0)])
        vals.append(np.abs(pg.ricci.data).max())
    assert vals[0] / vals[1] == pytest.approx(100.0, rel=1e-3)


def test_riemann_symmetries_and_bianchi(golden):
    R = golden.riemann
    mag = golden.magnitude("R")
    res = symmetry_residuals(R, scale=mag)
    assert max(res.values()) <= 1e-12
    D = golden.nabla_riemann.data
    # second Bianchi: nabla_f R_abcd + nabla_c R_abdf + nabla_d R_abfc = 0
    b2 = D + np.einsum("...abdfc->...abcdf", D) + np.einsum("...abfcd->...abcdf", D)
    assert np.abs(b2).max() <= 1e-10 * golden.magnitude("nabla R").max()


def test_projective_symmetry_tags(golden):
    P = golden.curvature("P")
    res = symmetry_residuals(P, scale=golden.magnitude("P"))
    assert set(res) == {"antisym(1,2)", "cyclic(1,2,3)"}
    assert max(res.values()) <= 1e-12
    # P has no pair symmetry in general
    assert symmetry_residuals(P, ["pair(12,34)"])["pair(12,34)"] > 1e-3


def test_conformal_trace_free(golden):
    C = golden.conformal
    tr = np.einsum("...ad,...abcd->...bc", golden.ginv.data, C.data)
    assert np.abs(tr).max() <= 1e-12 * golden.magnitude("C").max()


def test_metric_compatibility(hayward, golden):
    Dg = golden.evaluate(hayward.covariant_derivative(hayward.g))
    assert np.abs(Dg.data).max() <= 1e-12 * np.abs(golden.g.data).max()


def test_kulkarni_nomizu_identities(golden):
    g, S = golden.g, golden.ricci
    gg = kulkarni_nomizu(g, g)
    assert np.allclose(kulkarni_nomizu(g, S).data, kulkarni_nomizu(S, g).data, rtol=1e-13, atol=1e-15)
    assert max(symmetry_residuals(kulkarni_nomizu(g, S)).values()) <= 1e-13
    Z = kulkarni_nomizu(Tensor(np.zeros_like(g.data), "dd"), S)
    assert not Z.data.any()
    Q = tachibana(g, gg)
    assert np.abs(Q.data).max() <= 1e-12 * np.abs(gg.data).max()


def test_kulkarni_nomizu_rejects_asymmetric():
    A = Tensor(np.arange(16.0).reshape(4, 4), "dd")
    with pytest.raises(ValueError):
        kulkarni_nomizu(A, A)


def test_raise_lower_round_trip(golden):
    R = golden.riemann
    up = raise_index(R, 1, golden.ginv)
    assert up.positions == "uddd"
    back = lower_index(up, 1, golden.g)
    assert np.allclose(back.data, R.data, rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        lower_index(R, 1, golden.g)


def test_ricci_power_diagonal_oracle(golden):
    S, gi = golden.ricci.data, golden.ginv.data
    S3 = golden.ricci_power(3).data
    want = np.einsum("...ab,...bc,...cd,...de,...ef->...af", S, gi, S, gi, S)
    scale = np.abs(want).max(axis=(1, 2))[:, None, None]
    assert np.all(np.abs(S3 - want) <= 1e-12 * scale)
    with pytest.raises(ValueError):
        ricci_power(golden.ricci, golden.ginv, 0)


def test_contract_errors(golden):
    with pytest.raises(ValueError):
        contract(golden.g, 1, 2)
    with pytest.raises(IndexError):
        contract(golden.g, 1, 1, golden.ginv)


def test_derivative_index_is_last(pstar):
    # only r-derivatives survive in D_{1212,f} at theta = pi/2
    D = pstar.nabla_riemann
    assert D.comp(1, 2, 1, 2, 2)[0] != 0.0
    assert D.comp(1, 2, 1, 2, 3)[0] == 0.0


def test_comp_indexing_is_one_based(pstar):
    with pytest.raises(IndexError):
        pstar.g.comp(0, 1)
    with pytest.raises(IndexError):
        pstar.g.comp(1)
