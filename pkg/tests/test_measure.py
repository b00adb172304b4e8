import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgmt.harness.scenes import rotated_vertical
from hgmt.hgroup import Heisenberg
from hgmt.measure import (
    BLOCK,
    FiniteUnion,
    GraphPatch,
    PowerProfile,
    VerticalPatch,
    ball_measure,
    cylinder_excess,
    density_scan,
    dyadic_radii,
    estimate_measure,
    loglog_slope,
    measured_set_from_json,
    overlap_free,
    paraboloid_excess,
    tangent_scan,
    upper_density_constant,
)
from hgmt.subgroups import SubgroupError, VerticalSubgroup

from oracles import quadrature_ball_measure

H1 = Heisenberg(1)
YT = VerticalSubgroup(1, [[0.0, 1.0]])
PLANE = VerticalPatch(YT, H1.identity, [[-1, 1], [-1, 1]])


def test_patch_validation():
    with pytest.raises(SubgroupError):
        VerticalPatch(YT, H1.identity, [[1, -1], [-1, 1]])
    with pytest.raises(SubgroupError):
        VerticalPatch(YT, H1.identity, [[-1, 1]])
    with pytest.raises(ValueError):
        estimate_measure(PLANE, lambda y: np.ones(len(y), bool), 50, 0)


def test_everything_and_nothing():
    E = FiniteUnion((PLANE, VerticalPatch(YT, [3.0, 0.0, 0.0], [[0, 1], [0, 2]])))
    assert E.mass == 6.0 and E.metric_dim == 3
    every = estimate_measure(E, lambda y: np.ones(len(y), bool), 1000, 0)
    assert every.estimate == pytest.approx(6.0, rel=1e-12)
    none = estimate_measure(E, lambda y: np.zeros(len(y), bool), 1000, 0)
    assert none.estimate == 0.0 and none.ci > 0


def test_plane_ball_exact():
    # B(e, r) & {x = 0} = {|y| < r, |t| < r^2}: measure 4 r^3
    for r in (0.5, 0.1):
        est = ball_measure(PLANE, H1.identity, r, 20000, 1)
        assert abs(est.estimate - 4 * r ** 3) <= 3 * est.ci + 1e-15


def test_vs_quadrature_h1(rng):
    for _ in range(5):
        anchor = rng.uniform(-0.3, 0.3, 3)
        q = rng.uniform(-0.3, 0.3, 3)
        r = rng.uniform(0.2, 0.6)
        for patch in (VerticalPatch(rotated_vertical(1, rng.uniform(0, 3)), anchor, [[-1, 1], [-1, 1]]),
                      GraphPatch(YT, anchor, [[-1, 1], [-1, 1]], PowerProfile(0.8, 0.5))):
            ref = quadrature_ball_measure(patch, q, r, 10_000)
            est = ball_measure(patch, q, r, 100_000, int(rng.integers(1 << 30)))
            assert abs(est.estimate - ref) <= 3 * est.ci + 1e-3 * ref


def test_vs_quadrature_h2(rng):
    V = VerticalSubgroup.from_span(2, rng.standard_normal((2, 4)))
    patch = GraphPatch(V, [0.1, 0.0, -0.1, 0.2, 0.05], [[-1, 1], [-1, 1], [-1, 1]], PowerProfile(0.5, 1.0))
    q = patch.points(np.array([[0.1, -0.2, 0.03]]))[0]
    ref = quadrature_ball_measure(patch, q, 0.4, 100)
    est = ball_measure(patch, q, 0.4, 200_000, 3)
    assert abs(est.estimate - ref) <= 3 * est.ci + 2e-3 * ref


def test_ball_sampler_unbiased():
    patch = GraphPatch(YT, H1.identity, [[-1, 1], [-1, 1]], PowerProfile(0.8, 0.5))
    q, r = np.array([0.05, 0.1, -0.02]), 0.3
    a = ball_measure(patch, q, r, 100_000, 5)
    b = estimate_measure(patch, lambda y: H1.dist(y, q) < r, 400_000, 6)
    assert abs(a.estimate - b.estimate) <= 3 * (a.ci + b.ci)


def test_density_scan():
    d = density_scan(PLANE, H1.identity, 0.01, 0.5, 20000, 0)
    assert len(d.radii) == 6
    for v, c in zip(d.values, d.ci):
        assert abs(v - 4.0) <= 3 * c
    far = density_scan(PLANE, [10.0, 0.0, 0.0], 0.1, 0.5, 1000, 0)
    assert all(far.all_miss) and all(v == 0 for v in far.values)
    json.dumps(d.to_json())


def test_excess_monotone_in_lambda():
    patch = GraphPatch(YT, H1.identity, [[-1, 1], [-1, 1]], PowerProfile(1.0, 0.5))
    vals = [paraboloid_excess(patch, H1.identity, YT, lam, 0.5, 0.3, 20000, 4).estimate
            for lam in (0.1, 0.3, 0.6, 1.2)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[0] > 0 and vals[-1] == 0.0


@settings(max_examples=15)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_left_translation_equivariance(g):
    g = np.array(g)
    patch = GraphPatch(YT, H1.identity, [[-1, 1], [-1, 1]], PowerProfile(0.6, 1.0))
    moved = GraphPatch(YT, g, [[-1, 1], [-1, 1]], PowerProfile(0.6, 1.0))
    q = np.array([0.05, 0.1, 0.0])
    a = ball_measure(patch, q, 0.3, 5000, 9)
    b = ball_measure(moved, H1.mul(g, q), 0.3, 5000, 9)
    assert a.estimate == pytest.approx(b.estimate, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("s", [0.25, 3.0])
def test_dilation_scaling(s):
    V = rotated_vertical(2, 0.4)
    H = Heisenberg(2)
    anchor = np.array([0.1, 0.2, -0.1, 0.0, 0.05])
    box = np.array([[-1, 1], [-1, 1], [-1, 1], [-1, 1]], dtype=float)
    sbox = box * np.array([s, s, s, s * s])[:, None]
    q = np.array([0.0, 0.1, 0.0, 0.05, 0.0])
    a = ball_measure(VerticalPatch(V, anchor, box), q, 0.4, 20000, 2)
    b = ball_measure(VerticalPatch(V, H.dilate(s, anchor), sbox), H.dilate(s, q), 0.4 * s, 20000, 2)
    assert b.estimate == pytest.approx(s ** 5 * a.estimate, rel=1e-9)


def test_tangent_scan():
    cands = [YT, rotated_vertical(1, 0.5)]
    patch = VerticalPatch(rotated_vertical(1, 0.0), H1.identity, [[-1, 1], [-1, 1]])
    scan = tangent_scan(patch, H1.identity, cands, 1.0, 1.0, dyadic_radii(0.2, count=4), 5000, 0)
    assert scan.best_index == 0 and not scan.tie
    assert scan.decay_slope == float("inf")
    tied = tangent_scan(patch, H1.identity, [cands[1], cands[1]], 1.0, 1.0, [0.2, 0.1], 5000, 0)
    assert tied.tie
    with pytest.raises(ValueError):
        tangent_scan(patch, H1.identity, [], 1.0, 1.0, [0.1], 1000, 0)


def test_cylinder_excess_and_upper_density():
    patch = GraphPatch(YT, H1.identity, [[-1, 1], [-1, 1]], PowerProfile(1.0, 1.0))
    assert cylinder_excess(patch, H1.identity, YT, 0.5, 0.3, 5000, 0).estimate == 0.0
    assert cylinder_excess(patch, H1.identity, YT, 0.01, 0.3, 5000, 0).estimate > 0
    M = upper_density_constant(PLANE, [H1.identity, [0.0, 0.3, 0.1]], [0.2, 0.1], 5000, 0)
    assert 4.0 <= M < 4.5


def test_power_profile_holder(rng):
    for alpha in (0.3, 0.5, 1.0):
        prof = PowerProfile(0.7, alpha)
        patch = GraphPatch(rotated_vertical(2, 0.0), Heisenberg(2).identity, [[-1, 1]] * 4, prof)
        assert patch.holder_check(rng, 5000) <= prof.holder_const * (1 + 1e-12)
        c = rng.standard_normal((10, 3))
        eps = 1e-6
        num = (prof(c + eps * np.eye(3)[0], 1) - prof(c - eps * np.eye(3)[0], 1))[:, 0] / (2 * eps)
        assert np.allclose(num, prof.jacobian(c, 1)[:, 0, 0], atol=1e-6)


def test_tangent_at_flat_and_graph():
    patch = GraphPatch(YT, H1.identity, [[-1, 1], [-1, 1]], PowerProfile(1.0, 1.0))
    assert np.allclose(patch.tangent_at([0.0]).projector, YT.projector)
    assert not np.allclose(patch.tangent_at([0.5]).projector, YT.projector)


def test_json_round_trip():
    E = FiniteUnion((PLANE, GraphPatch(YT, [1.0, 0.0, 0.0], [[0, 1], [0, 1]], PowerProfile(0.5, 0.5, 0, (0.2,)))))
    doc = json.loads(json.dumps(E.to_json()))
    F = measured_set_from_json(doc)
    assert json.dumps(F.to_json(), sort_keys=True) == json.dumps(doc, sort_keys=True)
    assert ball_measure(F, [1.0, 0.3, 0.1], 0.3, 2000, 1) == ball_measure(E, [1.0, 0.3, 0.1], 0.3, 2000, 1)
    with pytest.raises(SubgroupError):
        measured_set_from_json({"type": "blob", "V": YT.to_json()})


def test_overlap_free(rng):
    assert overlap_free(FiniteUnion((PLANE, VerticalPatch(YT, [0.5, 0, 0], [[-1, 1], [-1, 1]]))), rng)
    assert not overlap_free(FiniteUnion((PLANE, PLANE)), rng)


def test_seed_determinism():
    patch = GraphPatch(YT, H1.identity, [[-1, 1], [-1, 1]], PowerProfile(1.0, 0.5))
    q = np.array([0.0, 0.1, 0.0])
    a = paraboloid_excess(patch, q, YT, 0.3, 0.5, 0.3, BLOCK + 500, 11)
    assert a.estimate > 0
    assert a == paraboloid_excess(patch, q, YT, 0.3, 0.5, 0.3, BLOCK + 500, 11)
    assert a != paraboloid_excess(patch, q, YT, 0.3, 0.5, 0.3, BLOCK + 500, 12)


def test_loglog_slope():
    r = np.array(dyadic_radii(1.0, count=6))
    assert loglog_slope(r, 3 * r ** 0.7) == pytest.approx(0.7)
    assert loglog_slope(r, np.zeros(6)) == float("inf")
    assert np.isnan(loglog_slope(r, [1, 0, 0, 0, 0, 0]))
