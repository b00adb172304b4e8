import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hgmt.hgroup import Heisenberg, omega
from hgmt.subgroups import (
    Decomposition,
    HLinearMap,
    HorizontalSubgroup,
    SubgroupError,
    VerticalSubgroup,
    canonical_decomposition,
    dist_to_horizontal,
    dist_to_vertical,
    hlinear_injectivity_constant,
    hlinear_kernel,
    horizontal_complement,
    kernel_hyperplanes,
    same_subgroup,
    sandwich_constant,
    split,
    subgroup_from_json,
)

from oracles import brute_dist_horizontal, brute_dist_vertical, zoom_grid_min

H1 = Heisenberg(1)
Y_T = VerticalSubgroup(1, [[0.0, 1.0]])
X_S = HorizontalSubgroup(1, [[1.0, 0.0]])


def random_vertical(rng, n, d=None):
    d = int(rng.integers(n, 2 * n)) if d is None else d
    return VerticalSubgroup.from_span(n, rng.standard_normal((d, 2 * n)))


def test_basis_validation():
    with pytest.raises(SubgroupError):
        HorizontalSubgroup(1, [[1.0, 0.0], [0.0, 1.0]])  # not isotropic
    with pytest.raises(SubgroupError):
        VerticalSubgroup(1, [[1.0, 1.0]])  # not unit
    with pytest.raises(SubgroupError):
        VerticalSubgroup.from_span(2, [[1, 0, 0, 0], [2, 0, 0, 0]])


def test_json_round_trip(rng):
    for S in (Y_T, X_S, random_vertical(rng, 2)):
        doc = json.loads(json.dumps(S.to_json()))
        assert set(doc) == {"kind", "n", "basis"}
        assert same_subgroup(subgroup_from_json(doc), S)


def test_split_examples():
    D = Decomposition(Y_T, X_S)
    t, s = split(H1.identity, D)
    assert np.allclose(t, 0) and np.allclose(s, 0)
    p = np.array([0.7, 0.0, 0.0])
    t, s = split(p, D)
    assert np.allclose(t, 0) and np.allclose(s, p)
    p = np.array([1.0, 1.0, 1.0])
    t, s = split(p, D)
    assert np.allclose(s, [1, 0, 0])
    assert np.allclose(t, H1.mul(p, H1.inv(s)))
    assert np.allclose(t, [0, 1, -1])
    assert np.allclose(H1.mul(t, s), p)
    assert Y_T.contains(t) and X_S.contains(s)


def test_split_factorization_many(rng):
    for n in (1, 2, 3):
        H = Heisenberg(n)
        D = canonical_decomposition(random_vertical(rng, n))
        p = H.random_points(rng, 5000)
        t, s = split(p, D)
        assert np.abs(H.mul(t, s) - p).max() <= 1e-11 * max(1, np.abs(p).max())
        assert np.all(D.T.contains(t)) and np.all(D.S.contains(s))


def test_dist_to_vertical_examples():
    assert dist_to_vertical([3.0, 0.0, 7.0], Y_T) == 3.0
    assert dist_to_vertical([0.0, 5.0, -2.0], Y_T) == 0.0
    assert np.isclose(brute_dist_vertical(np.array([3.0, 0.0, 7.0]), Y_T.wbasis), 3.0, atol=1e-6)


def test_dist_to_vertical_vs_grid(rng):
    for _ in range(40):
        n = int(rng.integers(1, 3))
        T = random_vertical(rng, n, int(rng.integers(1, 2 * n)))
        p = Heisenberg(n).random_points(rng, 1)[0]
        assert abs(dist_to_vertical(p, T) - brute_dist_vertical(p, T.wbasis)) <= 1e-6


@given(st.floats(0.01, 10.0), st.integers(0, 1000))
def test_dist_to_vertical_homogeneous(r, seed):
    rng = np.random.default_rng(seed)
    T = random_vertical(rng, 2)
    H = Heisenberg(2)
    p = H.random_points(rng, 1)[0]
    assert np.isclose(dist_to_vertical(H.dilate(r, p), T), r * dist_to_vertical(p, T), rtol=1e-12, atol=1e-14)


def test_dist_to_horizontal_examples():
    assert np.isclose(dist_to_horizontal([0.0, 0.0, 1.0], X_S), 1.0, atol=1e-8)
    assert dist_to_horizontal([0.4, 0.0, 0.0], X_S) < 1e-7
    res = dist_to_horizontal([0.3, 0.2, 0.5], X_S, full=True)
    assert res.converged and res.value <= H1.hnorm([0.3, 0.2, 0.5])


def test_dist_to_horizontal_vs_grid(rng):
    for _ in range(20):
        n = int(rng.integers(1, 3))
        S = horizontal_complement(random_vertical(rng, n, int(rng.integers(n, 2 * n))))
        p = Heisenberg(n).random_points(rng, 1)[0]
        assert abs(dist_to_horizontal(p, S) - brute_dist_horizontal(p, S.basis)) <= 1e-4


def test_projection_identities(rng):
    for n in (1, 2):
        H = Heisenberg(n)
        D = canonical_decomposition(random_vertical(rng, n))
        p, q = H.random_points(rng, 2000), H.random_points(rng, 2000)
        lam = np.exp(rng.standard_normal(2000))
        sp, sq = D.pi_S(p), D.pi_S(q)
        assert np.allclose(D.pi_S(H.mul(p, q)), H.mul(sp, sq), atol=1e-10)
        assert np.allclose(D.pi_S(H.inv(p)), H.inv(sp), atol=1e-10)
        assert np.allclose(D.pi_S(H.dilate(lam, p)), H.dilate(lam, sp), atol=1e-10)
        assert np.allclose(D.pi_T(H.dilate(lam, p)), H.dilate(lam, D.pi_T(p)), atol=1e-10)
        rhs = H.mul(H.mul(H.mul(D.pi_T(p), sp), D.pi_T(q)), H.inv(sp))
        assert np.allclose(D.pi_T(H.mul(p, q)), rhs, atol=1e-10)


def test_sandwich_orthogonal_pair():
    D = Decomposition(Y_T, X_S)
    res = sandwich_constant(D, 20000, 3)
    assert res.ok and res.violations == 0
    assert 0 < res.c_lo <= 1
    assert np.isclose(res.c_exact, 1.0)


def test_sandwich_oblique(rng):
    T = random_vertical(rng, 2, 3)
    v = T.perp_projector[0] + 0.8 * T.wbasis[0]
    D = Decomposition(T, HorizontalSubgroup(2, [v / np.linalg.norm(v)]))
    res = sandwich_constant(D, 50000, 4)
    assert res.ok and res.violations == 0
    assert res.c_exact < 0.99
    # the empirical infimum can only approach the exact constant from above
    assert res.c_exact - 1e-9 <= res.c_lo <= 1


def test_horizontal_complement_examples():
    S = horizontal_complement(Y_T)
    assert S.dim == 1 and np.allclose(np.abs(S.basis), [[1.0, 0.0]])
    # k = 2n: a single vector
    T = random_vertical(np.random.default_rng(1), 2, 3)
    assert horizontal_complement(T).dim == 1
    with pytest.raises(SubgroupError):
        horizontal_complement(VerticalSubgroup(2, [[1, 0, 0, 0]]))


def test_complement_when_orthogonal_is_not_isotropic():
    # W = span{x1, y1} in H^2: W^perp = span{x2, y2} is symplectic, not isotropic
    T = VerticalSubgroup(2, [[1, 0, 0, 0], [0, 0, 1, 0]])
    S = horizontal_complement(T)
    J = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]])
    assert np.allclose(S.basis @ J @ S.basis.T, 0)
    assert np.linalg.matrix_rank(np.vstack([T.wbasis, S.basis])) == 4


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_complement_properties(seed, n):
    rng = np.random.default_rng(seed)
    T = random_vertical(rng, n)
    S = horizontal_complement(T)
    stacked = np.vstack([T.wbasis, S.basis])
    assert S.dim == 2 * n - T.wbasis.shape[0]
    assert np.linalg.matrix_rank(stacked, tol=1e-8) == 2 * n
    assert np.abs(omega(S.basis[:, None, :], S.basis[None, :, :])).max() <= 1e-10
    assert np.allclose(S.basis @ S.basis.T, np.eye(S.dim), atol=1e-10)


def test_complement_locally_lipschitz(rng):
    for _ in range(5):
        n = int(rng.integers(1, 3))
        T = random_vertical(rng, n)
        U = horizontal_complement(T).projector
        direction = rng.standard_normal(T.wbasis.shape)
        K = []
        for eps in (1e-3, 1e-4, 1e-5):
            Te = VerticalSubgroup.from_span(n, T.wbasis + eps * direction)
            dist = np.linalg.norm(Te.projector - T.projector)
            K.append(np.linalg.norm(horizontal_complement(Te).projector - U) / dist)
        # bounded difference quotients that do not blow up as eps shrinks
        assert max(K) < 100 and K[-1] <= 2 * max(K[0], 1.0)


def test_kernel_hyperplanes(rng):
    N = kernel_hyperplanes(Y_T, X_S)
    assert len(N) == 1 and same_subgroup(N[0], Y_T)
    H = Heisenberg(2)
    T = random_vertical(rng, 2, 2)
    S = horizontal_complement(T)
    Ns = kernel_hyperplanes(T, S)
    assert len(Ns) == 2 and all(N.dim == 4 for N in Ns)
    p = H.random_points(rng, 5000)
    for N in Ns:
        assert np.all(dist_to_vertical(p, N) <= dist_to_vertical(p, T) + 1e-12)
    with pytest.raises(SubgroupError):
        kernel_hyperplanes(T, HorizontalSubgroup(2, [[1, 0, 0, 0]]))


def test_hlinear_kernel():
    K = hlinear_kernel(HLinearMap([[1.0, 0.0]]))
    assert same_subgroup(K, Y_T)
    rng = np.random.default_rng(2)
    for n in (1, 2, 3):
        for rows in range(1, n + 1):
            L = HLinearMap(rng.standard_normal((rows, 2 * n)))
            K = hlinear_kernel(L)
            assert K.wbasis.shape[0] == 2 * n - rows
            assert np.abs(L.matrix @ K.wbasis.T).max() < 1e-10
    with pytest.raises(SubgroupError):
        hlinear_kernel(HLinearMap([[1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0]]))


def test_hlinear_injectivity(rng):
    assert np.isclose(hlinear_injectivity_constant(HLinearMap([[1.0, 0.0]]), X_S), 1.0)
    for _ in range(10):
        L = HLinearMap(rng.standard_normal((2, 4)))
        V = HorizontalSubgroup(2, [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
        c = hlinear_injectivity_constant(L, V)
        assert np.isclose(hlinear_injectivity_constant(HLinearMap(2 * L.matrix), V), 2 * c)
        ang = np.linspace(0, 2 * np.pi, 20001)
        v = np.stack([np.cos(ang), np.sin(ang)], 1) @ V.basis
        assert abs(c - np.linalg.norm(v @ L.matrix.T, axis=1).min()) < 1e-6
    with pytest.raises(SubgroupError):
        hlinear_injectivity_constant(HLinearMap([[0.0, 1.0]]), X_S)
