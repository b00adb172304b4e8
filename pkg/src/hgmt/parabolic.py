"""alpha-paraboloids, cylinders and regular-surface scenes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq, root

from .grassmannian import GrassmannElement, rho
from .hgroup import Heisenberg
from .optimize import OptimizerOptions
from .report import VerificationReport
from .subgroups import (
    HLinearMap,
    HorizontalSubgroup,
    SubgroupError,
    VerticalSubgroup,
    _perp_basis,
    dist_to_horizontal,
    dist_to_vertical,
    hlinear_injectivity_constant,
    hlinear_kernel,
    horizontal_complement,
    orthonormal_rows,
)


def dist_to_subgroup(p, S: GrassmannElement, opts: OptimizerOptions = OptimizerOptions()) -> np.ndarray:
    """d(p, S): closed form for vertical S, optimized point by point for horizontal S."""
    if isinstance(S, VerticalSubgroup):
        return dist_to_vertical(p, S)
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, p.shape[-1])
    out = np.array([dist_to_horizontal(q, S, opts) for q in flat])
    return out.reshape(p.shape[:-1])


@dataclass(frozen=True)
class Paraboloid:
    """Q_alpha(x, S, lam) = {y : d(x^{-1} y, S) <= lam d(x, y)^{1+alpha}}."""

    center: np.ndarray
    base: GrassmannElement
    lam: float
    alpha: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("aperture must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(frozen=True)
class Cylinder:
    """x . C(S, eta) = {y : d(x^{-1} y, S) < eta}; center None means e."""

    axis: GrassmannElement
    eta: float
    center: np.ndarray | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("cylinder radius must be positive")


def _local(y, center, n):
    H = Heisenberg(n)
    y = H.check_finite(y)
    if center is None:
        return H, y
    return H, H.mul(H.inv(center), y)


def in_paraboloid(y, Q: Paraboloid, opts: OptimizerOptions = OptimizerOptions()) -> np.ndarray:
    H, local = _local(y, Q.center, Q.base.n)
    lhs = dist_to_subgroup(local, Q.base, opts)
    return lhs <= Q.lam * H.hnorm(local) ** (1 + Q.alpha)


def in_cylinder(y, C: Cylinder, opts: OptimizerOptions = OptimizerOptions()) -> np.ndarray:
    if np.isinf(C.eta):
        return np.ones(np.asarray(y).shape[:-1], dtype=bool)
    _, local = _local(y, C.center, C.axis.n)
    return dist_to_subgroup(local, C.axis, opts) < C.eta


def rescaled_aperture(lam: float, alpha: float, s: float) -> float:
    """y in Q_alpha(e,S,lam)  <=>  delta_s y in Q_alpha(e,S,lam * s^{-alpha})."""
    return lam * s ** (-alpha)


# ---------------------------------------------------------------------------
# sampling helpers


def uniform_ball(rng: np.random.Generator, dim: int, size: int, radius) -> np.ndarray:
    g = rng.standard_normal((size, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    u = rng.random(size) ** (1.0 / dim)
    return g * (u * radius)[:, None]


def gauge_ball(rng: np.random.Generator, n: int, size: int, r: float) -> np.ndarray:
    """Uniform (Haar) samples of B(e, r) = {||z'|| <= r, |t| <= r^2}."""
    h = uniform_ball(rng, 2 * n, size, r)
    t = rng.uniform(-r * r, r * r, size)
    return np.concatenate([h, t[:, None]], axis=1)


def near_axis(rng: np.random.Generator, V: VerticalSubgroup, size: int, r: float, band: float) -> np.ndarray:
    """Points whose first layer lies within ``band`` of W, at most r from e."""
    n = V.n
    d = V.wbasis.shape[0]
    w = uniform_ball(rng, d, size, r) @ V.wbasis if d else np.zeros((size, 2 * n))
    N = _perp_basis(V.wbasis, n)
    offs = uniform_ball(rng, N.shape[0], size, band) @ N
    t = rng.uniform(-r * r, r * r, size)
    return np.concatenate([w + offs, t[:, None]], axis=1)


def annulus_inclusion_check(x, V: GrassmannElement, lam: float, alpha: float, r: float,
                            samples: int, seed: int, lam_prime: float | None = None,
                            opts: OptimizerOptions = OptimizerOptions()) -> VerificationReport:
    """Count y in (B(x,r) minus B(x,r/2)) minus Q_alpha(x,V,lam') that lie in the
    cylinder x.C(V, lam r^{1+alpha}).  Default lam' = 4^{1+alpha} lam.

    Half of the samples are Haar-uniform in the annulus; the other half come from
    a band of width 2 * max(lam, lam') r^{1+alpha} around the axis, where the two
    sets can actually disagree.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    n = V.n
    H = Heisenberg(n)
    x = H.point(x)
    lp = 4.0 ** (1 + alpha) * lam if lam_prime is None else float(lam_prime)
    rng = np.random.default_rng(seed)
    eta = lam * r ** (1 + alpha)

    def draw(kind, size):
        got, total = [], 0
        while total < size:
            m = 2 * (size - total) + 16
            if kind == "uniform" or not isinstance(V, VerticalSubgroup):
                z = gauge_ball(rng, n, m, r)
            else:
                z = near_axis(rng, V, m, r, 2 * max(lam, lp) * r ** (1 + alpha))
            d = H.hnorm(z)
            z = z[(d >= r / 2) & (d < r)]
            got.append(z)
            total += len(z)
        return np.concatenate(got)[:size]

    n_band = samples // 2
    z = np.concatenate([draw("uniform", samples - n_band), draw("band", n_band)])
    y = H.mul(x, z)
    dV = dist_to_subgroup(z, V, opts)
    dist = H.hnorm(z)
    outside_Q = dV > lp * dist ** (1 + alpha)
    inside_C = dV < eta
    bad = outside_Q & inside_C
    rep = VerificationReport("annulus_inclusion")
    rep.params = {"n": n, "k": V.dim, "alpha": alpha, "lambda": lam, "lambda_prime": lp,
                  "r": r, "samples": int(samples), "seed": int(seed), "cylinder_radius": eta}
    rep.violations = int(bad.sum())
    rep.add("fraction_outside_paraboloid", float(outside_Q.mean()))
    rep.add("fraction_inside_cylinder", float(inside_C.mean()))
    if rep.violations:
        rep.add("witness", y[np.argmax(bad)].tolist())
    return rep


# ---------------------------------------------------------------------------
# tube lemma


class TubeAxis(NamedTuple):
    Z: VerticalSubgroup
    ell: float
    theta: float
    sigma: float
    e: np.ndarray


def tube_axis(S: VerticalSubgroup, T: VerticalSubgroup, opts: OptimizerOptions = OptimizerOptions(),
              theta: float | None = None, theta_tol: float = 1e-9) -> TubeAxis:
    """Z and ell with C(S,eta) & C(T,eta) inside C(Z, 3 n eta / (ell theta)).

    Linear algebra runs on the first layer, where d(y, V) is the Euclidean
    distance of y' to W_V: e is the unit vector of W_T^perp with the largest
    component sigma along W_S, and Z^perp = span{e, W_S^perp}.  Then
    ell = sigma / theta.
    """
    if not (isinstance(S, VerticalSubgroup) and isinstance(T, VerticalSubgroup)):
        raise SubgroupError("tube_axis needs vertical subgroups")
    if S.dim != T.dim or S.n != T.n:
        raise SubgroupError("axes must have the same dimension")
    n = S.n
    th = rho(S, T, opts) if theta is None else float(theta)
    if th < theta_tol:
        raise SubgroupError(f"axes nearly equal (theta={th:.3e}); tube lemma degenerate")
    Tperp = _perp_basis(T.wbasis, n)
    Sperp = _perp_basis(S.wbasis, n)
    G = Tperp @ S.projector
    left, sv, _ = np.linalg.svd(G, full_matrices=False)
    sigma = float(sv[0])
    if sigma < theta_tol:
        raise SubgroupError("axes have equal first layers")
    e = left[:, 0] @ Tperp
    if e[np.argmax(np.abs(e))] < 0:
        e = -e
    span = orthonormal_rows(np.vstack([Sperp, e]))
    Zw = _perp_basis(span, n)
    Z = VerticalSubgroup(n, Zw) if Zw.shape[0] else VerticalSubgroup(n, np.zeros((0, 2 * n)))
    return TubeAxis(Z, sigma / th, th, sigma, e)


def tube_radius(n: int, eta: float, ell: float, theta: float) -> float:
    return 3 * n * eta / (ell * theta)


# ---------------------------------------------------------------------------
# regular surfaces


@dataclass
class SurfaceScene:
    """Zero set of f : H^n -> R^m (m = 2n+1-k) near a base point x0."""

    n: int
    f: Callable
    grad_h: Callable
    alpha: float
    holder_const: float
    x0: np.ndarray
    name: str = "custom"

    @property
    def differential(self) -> HLinearMap:
        return HLinearMap(np.atleast_2d(self.grad_h(np.asarray(self.x0, dtype=float))))

    @property
    def tangent_group(self) -> VerticalSubgroup:
        return hlinear_kernel(self.differential)

    def validate(self, rng: np.random.Generator, samples: int = 200, radius: float = 0.5) -> float:
        """Rank check plus the Taylor remainder bound on sampled points.

        Returns the largest observed remainder ratio (must be <= holder_const).
        """
        H = Heisenberg(self.n)
        L = self.differential
        if L.rank < L.matrix.shape[0]:
            raise SubgroupError("d_H f at x0 is not surjective")
        x0 = np.asarray(self.x0, dtype=float)
        z = gauge_ball(rng, self.n, samples, radius)
        x = H.mul(x0, z)
        f0 = np.atleast_1d(self.f(x0))
        rem = np.atleast_2d(self.f(x)).reshape(samples, -1) - f0 - L(z)
        d = H.hnorm(z)
        ratio = float(np.max(np.linalg.norm(rem, axis=1) / np.maximum(d, 1e-300) ** (1 + self.alpha)))
        if ratio > self.holder_const * (1 + 1e-9):
            raise ValueError(f"Taylor remainder ratio {ratio:.3g} exceeds declared {self.holder_const}")
        return ratio


def _horizontal_gradient_of_t_linear(n, v, b):
    """nabla_H of p -> <v, p'> + b t:  X_i = d_{x_i} + 2 y_i d_t,  Y_i = d_{y_i} - 2 x_i d_t."""
    def grad(p):
        p = np.asarray(p, dtype=float)
        h = p[..., :-1]
        corr = np.concatenate([2 * h[..., n:], -2 * h[..., :n]], axis=-1)
        return (v + b * corr)[..., None, :]
    return grad


def surface_preset(name: str, n: int, normal=None, alpha: float = 1.0, coef: float = 0.0,
                   x0=None) -> SurfaceScene:
    """Preset catalog of codimension-one scenes through x0 (default e).

    * ``flat``:     f(p) = <nu, (x0^{-1} p)'>
    * ``power``:    f(p) = <nu, q'> + coef * ||P q'||^{1+alpha},  q = x0^{-1} p,
                    P the projector onto nu^perp
    * ``tilted_t``: f(p) = <nu, q'> + coef * q_t   (alpha = 1)
    """
    H = Heisenberg(n)
    nu = np.zeros(2 * n)
    nu[0] = 1.0
    if normal is not None:
        nu = np.asarray(normal, dtype=float)
        nu = nu / np.linalg.norm(nu)
    x0 = H.identity if x0 is None else H.point(x0)
    P = np.eye(2 * n) - np.outer(nu, nu)

    def local(p):
        return H.mul(H.inv(x0), np.asarray(p, dtype=float))

    if name == "flat":
        def f(p):
            return (local(p)[..., :-1] @ nu)[..., None]

        def g(p):
            return np.broadcast_to(nu, np.asarray(p).shape[:-1] + (1, 2 * n)).copy()
        return SurfaceScene(n, f, g, alpha, 1e-12, x0, "flat")

    if name == "power":
        a = float(coef)

        def f(p):
            q = local(p)[..., :-1]
            return (q @ nu + a * np.linalg.norm(q @ P, axis=-1) ** (1 + alpha))[..., None]

        def g(p):
            # f depends on the first layer of q only; left translation keeps X_i, Y_i
            q = local(p)[..., :-1]
            w = q @ P
            nw = np.linalg.norm(w, axis=-1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                grad_w = np.where(nw > 0, (1 + alpha) * nw ** (alpha - 1) * w, 0.0)
            return (nu + a * grad_w)[..., None, :]
        return SurfaceScene(n, f, g, alpha, abs(a) * 1.0000001 + 1e-12, x0, "power")

    if name == "tilted_t":
        b = float(coef)
        base = _horizontal_gradient_of_t_linear(n, nu, b)

        def f(p):
            q = local(p)
            return (q[..., :-1] @ nu + b * q[..., -1])[..., None]

        def g(p):
            return base(local(p))
        return SurfaceScene(n, f, g, 1.0, abs(b) * 1.0000001 + 1e-12, x0, "tilted_t")

    raise KeyError(f"unknown surface preset {name!r}")


SURFACE_PRESETS = ("flat", "power", "tilted_t")


class FitResult(NamedTuple):
    lam_est: float
    report: VerificationReport


def surface_paraboloid_fit(scene: SurfaceScene, r_grid, samples: int, seed: int,
                           bracket: float = 2.0, xtol: float = 1e-10) -> FitResult:
    """Smallest aperture lam with S & B(x0, r) inside Q_alpha(x0, T_H S(x0), lam).

    Surface points come from tangent-group points v, moved along the horizontal
    complement until f vanishes: 1-D bisection in codimension one, a general
    root solve otherwise.
    """
    H = Heisenberg(scene.n)
    x0 = np.asarray(scene.x0, dtype=float)
    T = scene.tangent_group
    U = horizontal_complement(T).basis
    rng = np.random.default_rng(seed)
    per_radius, failures = [], 0
    for r in r_grid:
        worst = 0.0
        d_tw = T.wbasis.shape[0]
        c = uniform_ball(rng, d_tw, samples, r) @ T.wbasis
        t = rng.uniform(-r * r, r * r, samples)
        v = H.mul(x0, np.concatenate([c, t[:, None]], axis=1))
        for vi in v:
            def g(s, vi=vi):
                step = np.concatenate([np.atleast_1d(s) @ U, [0.0]])
                return np.atleast_1d(scene.f(H.mul(vi, step)))

            try:
                if U.shape[0] == 1:
                    lo, hi = -bracket * r, bracket * r
                    glo, ghi = g(lo)[0], g(hi)[0]
                    if glo * ghi > 0:
                        failures += 1
                        continue
                    s = np.array([brentq(lambda s: g(s)[0], lo, hi, xtol=xtol)])
                else:
                    sol = root(g, np.zeros(U.shape[0]), tol=xtol)
                    if not sol.success:
                        failures += 1
                        continue
                    s = sol.x
            except (ValueError, RuntimeError):
                failures += 1
                continue
            y = H.mul(vi, np.concatenate([s @ U, [0.0]]))
            loc = H.mul(H.inv(x0), y)
            d = float(H.hnorm(loc))
            if d <= 0 or d >= r:
                continue
            worst = max(worst, float(dist_to_vertical(loc, T)) / d ** (1 + scene.alpha))
        per_radius.append(worst)
    lam_est = float(max(per_radius)) if per_radius else 0.0
    rep = VerificationReport("surface_paraboloid_fit")
    rep.params = {"n": scene.n, "k": T.dim, "alpha": scene.alpha, "scene": scene.name,
                  "samples": int(samples), "seed": int(seed), "r_grid": list(map(float, r_grid))}
    rep.add("lambda_per_radius", per_radius)
    rep.add("lambda_est", lam_est)
    rep.add("root_failures", failures)
    try:
        c_inj = hlinear_injectivity_constant(scene.differential, HorizontalSubgroup(scene.n, U))
        rep.add("injectivity_constant", c_inj)
        rep.add("lambda_bound", scene.holder_const / c_inj)
    except SubgroupError:
        pass
    return FitResult(lam_est, rep)
