"""The intrinsic Grassmannian of H^n and its rho-metric.

Elements are the two subgroup classes of :mod:`hgmt.subgroups`: horizontal
for 1 <= k <= n and vertical for n+1 <= k <= 2n.  Projections inside rho always
use the canonical complement returned by :func:`canonical_perp`.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple, Union

import numpy as np

from .hgroup import Heisenberg, omega, symplectic_matrix
from .optimize import OptimizerOptions, multistart_minimize
from .subgroups import (
    Decomposition,
    HorizontalSubgroup,
    SubgroupError,
    VerticalSubgroup,
    _perp_basis,
    horizontal_complement,
)

GrassmannElement = Union[HorizontalSubgroup, VerticalSubgroup]


def metric_dimension(k: int, n: int) -> int:
    if n < 1 or not 1 <= k <= 2 * n:
        raise ValueError(f"k must lie in [1, 2n] (k={k}, n={n})")
    return k if k <= n else k + 1


def is_grassmann_element(S) -> bool:
    if isinstance(S, HorizontalSubgroup):
        return 1 <= S.dim <= S.n
    if isinstance(S, VerticalSubgroup):
        return S.n + 1 <= S.dim <= 2 * S.n
    return False


def canonical_perp(S: GrassmannElement) -> GrassmannElement:
    """Horizontal S -> (S^perp in the first layer) + center; vertical V -> its
    canonical horizontal complement."""
    if isinstance(S, HorizontalSubgroup):
        return VerticalSubgroup(S.n, _perp_basis(S.basis, S.n))
    if isinstance(S, VerticalSubgroup):
        return horizontal_complement(S)
    raise TypeError(f"not a Grassmannian element: {S!r}")


class Projector:
    """pi_S for a Grassmannian element S with respect to canonical_perp(S).

    Both projections are precomputed as x -> (x' A, keep * t + 2 omega(x', x' B)),
    with B the complement-factor map of the splitting: pi_S(x) = (x' B, 0) for
    horizontal S, and pi_T(x) = x . pi_S(x)^{-1} for vertical T.
    """

    def __init__(self, S: GrassmannElement):
        self.S = S
        self.H = Heisenberg(S.n)
        if isinstance(S, VerticalSubgroup):
            self.decomp = Decomposition(S, canonical_perp(S))
        else:
            self.decomp = Decomposition(canonical_perp(S), S)
        B = self.decomp.horizontal_component(np.eye(2 * S.n))
        J = symplectic_matrix(S.n)
        if isinstance(S, VerticalSubgroup):
            self._A = np.eye(2 * S.n) - B
            self._Q = J @ B.T
            self._keep = 1.0
        else:
            self._A = B
            self._Q = np.zeros_like(B)
            self._keep = 0.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = x[..., :-1]
        t = self._keep * x[..., -1] + 2 * np.einsum("...i,ij,...j->...", h, self._Q, h)
        return np.concatenate([h @ self._A, t[..., None]], axis=-1)


# ---------------------------------------------------------------------------
# homogeneous unit sphere {max(||x'||, |t|^{1/2}) = 1}


def _sphere_points(angles: np.ndarray) -> np.ndarray:
    """Hyperspherical coordinates -> unit vectors; last angle is the azimuth."""
    angles = np.atleast_2d(angles)
    k = angles.shape[1]
    out = np.ones((angles.shape[0], k + 1))
    for i in range(k):
        out[:, i] *= np.cos(angles[:, i])
        out[:, i + 1:] *= np.sin(angles[:, i])[:, None]
    return out


def side_face(angles, tparam) -> np.ndarray:
    """||x'|| = 1, t = sin(tparam) in [-1, 1]."""
    h = _sphere_points(angles)
    return np.concatenate([h, np.sin(np.asarray(tparam, dtype=float)).reshape(-1, 1)], axis=1)


def cap_face(angles, rparam, sign) -> np.ndarray:
    """|t| = 1, x' = sin(rparam)^2 * unit vector (inside the closed unit ball)."""
    h = _sphere_points(angles) * (np.sin(np.asarray(rparam, dtype=float)) ** 2).reshape(-1, 1)
    t = np.full((h.shape[0], 1), float(sign))
    return np.concatenate([h, t], axis=1)


def _angle_grid(n: int, res: int) -> np.ndarray:
    k = 2 * n - 1
    axes = []
    for i in range(k):
        if i == k - 1:
            axes.append(np.linspace(0.0, 2 * np.pi, res, endpoint=False))
        else:
            axes.append((np.arange(res) + 0.5) * np.pi / res)
    return np.array(list(itertools.product(*axes)))


class RhoResult(NamedTuple):
    value: float
    argmax: np.ndarray
    grid_value: float
    converged: bool


def rho(S1: GrassmannElement, S2: GrassmannElement, opts: OptimizerOptions = OptimizerOptions(),
        full: bool = False):
    """max over the homogeneous unit sphere of d(pi_{S1}(x), pi_{S2}(x)).

    Stratified grid over both faces of the gauge sphere, then Nelder-Mead polish
    from the best ``opts.polish_side`` / ``opts.polish_cap`` grid points of each face.
    """
    if S1.kind != S2.kind or S1.n != S2.n or S1.dim != S2.dim:
        raise SubgroupError("rho needs two elements of the same class and dimension")
    n = S1.n
    H = Heisenberg(n)
    P1, P2 = Projector(S1), Projector(S2)

    def f(x):
        # d(a, b) = ||(b^{-1} a)||, written out to keep the polish loop cheap
        a, b = P1(x), P2(x)
        dh = a[..., :-1] - b[..., :-1]
        dt = a[..., -1] - b[..., -1] + 2 * omega(b[..., :-1], a[..., :-1])
        return np.maximum(np.linalg.norm(dh, axis=-1), np.sqrt(np.abs(dt)))

    res = opts.grid_n1 if n == 1 else opts.grid_n2
    ang = _angle_grid(n, res)
    tgrid = (np.arange(res) + 0.5) * np.pi / res - np.pi / 2
    A = np.repeat(ang, tgrid.size, axis=0)
    Tp = np.tile(tgrid, ang.shape[0])
    side = side_face(A, Tp)
    vals_side = f(side)
    caps, vals_cap, cap_params = [], [], []
    rgrid = (np.arange(max(res // 4, 4)) + 0.5) * (np.pi / 2) / max(res // 4, 4)
    for sign in (1.0, -1.0):
        Ac = np.repeat(ang, rgrid.size, axis=0)
        Rc = np.tile(rgrid, ang.shape[0])
        cp = cap_face(Ac, Rc, sign)
        caps.append(cp)
        vals_cap.append(f(cp))
        cap_params.append((Ac, Rc, sign))

    grid_best = float(max(vals_side.max(), max(v.max() for v in vals_cap)))
    best_val = grid_best
    i = int(np.argmax(vals_side))
    best_x = side[i]
    converged = True

    def side_obj(z):
        return -float(f(side_face(z[:-1][None], z[-1:]))[0])

    top = np.argsort(vals_side)[::-1][:opts.polish_side]
    starts = [np.concatenate([A[j], [Tp[j]]]) for j in top]
    r = multistart_minimize(side_obj, starts, opts)
    converged &= r.converged
    if -r.fun > best_val:
        best_val = -r.fun
        best_x = side_face(r.x[:-1][None], r.x[-1:])[0]

    for (Ac, Rc, sign), v in zip(cap_params, vals_cap):
        def cap_obj(z, sign=sign):
            return -float(f(cap_face(z[:-1][None], z[-1:], sign))[0])

        top = np.argsort(v)[::-1][:opts.polish_cap]
        r = multistart_minimize(cap_obj, [np.concatenate([Ac[j], [Rc[j]]]) for j in top], opts)
        converged &= r.converged
        if -r.fun > best_val:
            best_val = -r.fun
            best_x = cap_face(r.x[:-1][None], r.x[-1:], sign)[0]

    out = RhoResult(float(best_val), best_x, grid_best, bool(converged))
    return out if full else out.value


def dilation_invariant(S: GrassmannElement, r: float) -> bool:
    """Basis check that delta_r(S) = S: dilations scale the first layer, so the
    span (and the center for verticals) is preserved."""
    if r <= 0:
        raise ValueError("r must be positive")
    B = r * S.basis
    if B.shape[0] == 0:
        return True
    sub = type(S).from_span(S.n, B)
    return bool(np.allclose(sub.projector, S.projector, atol=1e-12))
