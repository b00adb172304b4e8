"""Model measured sets and Monte Carlo estimates of H^{k_m} on them.

Mass convention: the H^{k_m}-mass of a patch is the Lebesgue measure of its
parameter box (Haar normalization constant 1).  For graph patches this ignores
the area Jacobian; the bias is O(H_phi * diam^alpha) and is reported, not
corrected.

When a region is known to lie inside a gauge ball B(q, r), sampling is
restricted to the sub-box of parameters that can reach that ball.  The estimate
stays unbiased (points outside the sub-box cannot be hits) and small balls
still receive every sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .hgroup import Heisenberg, omega
from .parabolic import in_paraboloid, Paraboloid
from .subgroups import SubgroupError, VerticalSubgroup, _perp_basis, dist_to_vertical, subgroup_from_json

BLOCK = 1 << 16
Z95 = 1.96


def _holder_power_grad(c: np.ndarray, coef: float, alpha: float) -> np.ndarray:
    nc = np.linalg.norm(c, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(nc > 0, coef * (1 + alpha) * nc ** (alpha - 1) * c, 0.0)
    return g


@dataclass(frozen=True)
class PowerProfile:
    """phi(c) = coef * ||c - center||^{1+alpha} along one complement coordinate."""

    coef: float
    alpha: float
    component: int = 0
    center: tuple = ()

    def _shift(self, c):
        if not self.center:
            return c
        return c - np.asarray(self.center, dtype=float)

    def __call__(self, c: np.ndarray, out_dim: int) -> np.ndarray:
        c = self._shift(c)
        val = self.coef * np.linalg.norm(c, axis=-1) ** (1 + self.alpha)
        out = np.zeros(c.shape[:-1] + (out_dim,))
        out[..., self.component] = val
        return out

    def jacobian(self, c: np.ndarray, out_dim: int) -> np.ndarray:
        """d phi / d c, shape (..., out_dim, len(c))."""
        c = self._shift(c)
        J = np.zeros(c.shape[:-1] + (out_dim, c.shape[-1]))
        J[..., self.component, :] = _holder_power_grad(c, self.coef, self.alpha)
        return J

    @property
    def holder_const(self) -> float:
        # the map v -> |v|^{a-1} v is a-Hoelder with constant 2^{1-a}
        return abs(self.coef) * (1 + self.alpha) * 2 ** (1 - self.alpha)

    def to_json(self) -> dict:
        return {"preset": "power", "coef": self.coef, "alpha": self.alpha,
                "component": self.component, "center": list(self.center)}


def profile_from_json(doc) -> PowerProfile:
    if doc.get("preset") == "power":
        return PowerProfile(float(doc["coef"]), float(doc["alpha"]), int(doc.get("component", 0)),
                            tuple(float(x) for x in doc.get("center", ())))
    if doc.get("preset") == "zero":
        return PowerProfile(0.0, float(doc.get("alpha", 1.0)))
    raise SubgroupError(f"unknown profile {doc!r}")


class MeasuredSet:
    """Base class; subclasses provide ``members`` of primitive patches."""

    @property
    def members(self) -> list["Patch"]:
        raise NotImplementedError

    @property
    def mass(self) -> float:
        return float(sum(m.box_mass for m in self.members))

    @property
    def n(self) -> int:
        return self.members[0].V.n

    @property
    def metric_dim(self) -> int:
        return self.members[0].V.metric_dim


@dataclass(frozen=True, eq=False)
class Patch(MeasuredSet):
    """anchor . (c W + phi(c) N, t) over a parameter box in R^{k-1} x R."""

    V: VerticalSubgroup
    anchor: np.ndarray
    box: np.ndarray
    profile: PowerProfile | None = None
    N: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        H = Heisenberg(self.V.n)
        object.__setattr__(self, "anchor", H.point(self.anchor))
        box = np.asarray(self.box, dtype=float)
        if box.shape != (self.V.dim, 2) or np.any(box[:, 1] <= box[:, 0]):
            raise SubgroupError(f"parameter box must be a nondegenerate ({self.V.dim}, 2) array")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "N", _perp_basis(self.V.wbasis, self.V.n))

    @property
    def members(self):
        return [self]

    @property
    def box_mass(self) -> float:
        return float(np.prod(self.box[:, 1] - self.box[:, 0]))

    def local_points(self, params: np.ndarray) -> np.ndarray:
        c, t = params[..., :-1], params[..., -1]
        h = c @ self.V.wbasis
        if self.profile is not None:
            h = h + self.profile(c, self.N.shape[0]) @ self.N
        return np.concatenate([h, t[..., None]], axis=-1)

    def points(self, params: np.ndarray) -> np.ndarray:
        H = Heisenberg(self.V.n)
        return H.mul(self.anchor, self.local_points(params))

    def tangent_at(self, c) -> VerticalSubgroup:
        """Tangent group at the point with first-layer parameters c."""
        c = np.asarray(c, dtype=float)
        if self.profile is None:
            return self.V
        J = self.profile.jacobian(c, self.N.shape[0])
        rows = self.V.wbasis + J.T @ self.N
        return VerticalSubgroup.from_span(self.V.n, rows)

    def sub_box(self, q, r) -> np.ndarray | None:
        """First-layer parameters whose points can lie in B(q, r); None if empty.

        The W-component of a point's offset from q is at most r, so c stays
        within the cube of half-side r around W (q' - anchor').
        """
        q = np.asarray(q, dtype=float)
        cc = self.V.wbasis @ (q[:-1] - self.anchor[:-1])
        lo = np.maximum(cc - r, self.box[:-1, 0])
        hi = np.minimum(cc + r, self.box[:-1, 1])
        if np.any(hi <= lo):
            return None
        return np.stack([lo, hi], axis=1)

    def t_window(self, c: np.ndarray, q, r) -> tuple[np.ndarray, np.ndarray]:
        """For each c, the t-interval (inside the box) with |(q^{-1} y)_t| <= r^2.

        t enters (q^{-1} y)_t additively, so the window is exact.
        """
        H = Heisenberg(self.V.n)
        y0 = self.points(np.concatenate([c, np.zeros(c.shape[:-1] + (1,))], axis=-1))
        u0 = H.mul(H.inv(np.asarray(q, dtype=float)), y0)[..., -1]
        lo = np.maximum(-r * r - u0, self.box[-1, 0])
        hi = np.minimum(r * r - u0, self.box[-1, 1])
        return lo, np.maximum(hi, lo)

    def holder_check(self, rng: np.random.Generator, pairs: int = 2000) -> float:
        """Largest |D phi(a) - D phi(b)| / |a - b|^alpha over sampled parameter pairs."""
        if self.profile is None:
            return 0.0
        cb = self.box[:-1]
        a = rng.uniform(cb[:, 0], cb[:, 1], (pairs, cb.shape[0]))
        b = rng.uniform(cb[:, 0], cb[:, 1], (pairs, cb.shape[0]))
        m = self.N.shape[0]
        dj = np.linalg.norm(self.profile.jacobian(a, m) - self.profile.jacobian(b, m), axis=(-2, -1))
        return float(np.max(dj / np.linalg.norm(a - b, axis=1) ** self.profile.alpha))

    def to_json(self) -> dict:
        doc = {"type": "graph_patch" if self.profile is not None else "vertical_patch",
               "V": self.V.to_json(), "anchor": self.anchor.tolist(), "box": self.box.tolist()}
        if self.profile is not None:
            doc["phi"] = self.profile.to_json()
        return doc


def VerticalPatch(V, anchor, box) -> Patch:
    return Patch(V, anchor, box)


def GraphPatch(V, anchor, box, profile: PowerProfile) -> Patch:
    return Patch(V, anchor, box, profile)


@dataclass(frozen=True, eq=False)
class FiniteUnion(MeasuredSet):
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise SubgroupError("empty union")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def members(self):
        out = []
        for p in self.parts:
            out.extend(p.members)
        return out

    def to_json(self) -> dict:
        return {"type": "union", "members": [p.to_json() for p in self.parts]}


def measured_set_from_json(doc) -> MeasuredSet:
    kind = doc.get("type")
    if kind == "union":
        return FiniteUnion(tuple(measured_set_from_json(m) for m in doc["members"]))
    V = subgroup_from_json(doc["V"])
    if not isinstance(V, VerticalSubgroup):
        raise SubgroupError("patches are built on vertical subgroups")
    if kind == "vertical_patch":
        return Patch(V, doc["anchor"], doc["box"])
    if kind == "graph_patch":
        return Patch(V, doc["anchor"], doc["box"], profile_from_json(doc["phi"]))
    raise SubgroupError(f"unknown measured-set type {kind!r}")


def overlap_free(E: MeasuredSet, rng: np.random.Generator, samples: int = 2000, tol: float = 1e-9) -> bool:
    """Sampled check that no member point lies on another member."""
    mem = E.members
    for i, a in enumerate(mem):
        u = rng.random((samples, a.V.dim))
        pts = a.points(a.box[:, 0] + u * (a.box[:, 1] - a.box[:, 0]))
        for j, b in enumerate(mem):
            if i == j:
                continue
            H = Heisenberg(b.V.n)
            loc = H.mul(H.inv(b.anchor), pts)
            c = loc[:, :-1] @ b.V.wbasis.T
            inside = np.all((c >= b.box[:-1, 0]) & (c <= b.box[:-1, 1]), axis=1)
            params = np.concatenate([c, loc[:, -1:]], axis=1)
            inside &= (loc[:, -1] >= b.box[-1, 0]) & (loc[:, -1] <= b.box[-1, 1])
            if not np.any(inside):
                continue
            diff = np.linalg.norm(b.local_points(params[inside]) - loc[inside], axis=1)
            if np.any(diff < tol):
                return False
    return True


# ---------------------------------------------------------------------------
# estimators


class Estimate(NamedTuple):
    estimate: float
    ci: float


def _binomial_ci(hits: int, total: int, mass: float) -> float:
    # half-width from p~ = (h + 1/2)/(N + 1) so that the interval never collapses
    p = (hits + 0.5) / (total + 1)
    return Z95 * mass * float(np.sqrt(p * (1 - p) / total))


def estimate_measure(E: MeasuredSet, region: Callable, samples: int, seed: int,
                     ball: tuple | None = None) -> Estimate:
    """H^{k_m}(E & region) by parameter sampling, member by member.

    Without ``ball`` the parameter box is sampled uniformly and the estimate is
    mass * hit fraction.  ``ball=(q, r)`` promises region lies in B(q, r): c is
    then drawn from the reachable sub-box, t uniformly from its exact window,
    and each hit is weighted by the window volume.  The ci is the larger of the
    sample-variance interval and the binomial interval at the mean weight.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    members = E.members
    children = np.random.SeedSequence(seed).spawn(len(members))
    total, var = 0.0, 0.0
    for patch, child in zip(members, children):
        cbox = patch.box[:-1] if ball is None else patch.sub_box(*ball)
        if cbox is None:
            continue
        vol_c = float(np.prod(cbox[:, 1] - cbox[:, 0]))
        s1 = s2 = wsum = 0.0
        hits = 0
        done = 0
        for b in child.spawn((samples + BLOCK - 1) // BLOCK):
            size = min(BLOCK, samples - done)
            rng = np.random.default_rng(b)
            u = rng.random((size, cbox.shape[0] + 1))
            c = cbox[:, 0] + u[:, :-1] * (cbox[:, 1] - cbox[:, 0])
            if ball is None:
                lo = np.full(size, patch.box[-1, 0])
                hi = np.full(size, patch.box[-1, 1])
            else:
                lo, hi = patch.t_window(c, *ball)
            t = lo + u[:, -1] * (hi - lo)
            w = vol_c * (hi - lo)
            hit = region(patch.points(np.concatenate([c, t[:, None]], axis=1))) & (w > 0)
            x = np.where(hit, w, 0.0)
            s1 += float(x.sum())
            s2 += float((x * x).sum())
            wsum += float(w.sum())
            hits += int(np.count_nonzero(hit))
            done += size
        mean = s1 / samples
        v = max(s2 / samples - mean * mean, 0.0) / samples
        floor = (_binomial_ci(hits, samples, wsum / samples) / Z95) ** 2
        total += mean
        var += max(v, floor)
    return Estimate(float(total), float(Z95 * np.sqrt(var)))


def ball_region(q, r) -> Callable:
    H = Heisenberg(len(q) // 2)
    q = np.asarray(q, dtype=float)

    def region(y):
        return H.dist(y, q) < r
    return region


def ball_measure(E: MeasuredSet, q, r, samples: int, seed: int) -> Estimate:
    return estimate_measure(E, ball_region(q, r), samples, seed, ball=(q, r))


def dyadic_radii(r_max: float, r_min: float | None = None, count: int = 11) -> list[float]:
    if r_min is None:
        return [r_max * 2.0 ** (-j) for j in range(count)]
    out, r = [], r_max
    while r >= r_min * (1 - 1e-12):
        out.append(r)
        r /= 2
    return out


@dataclass
class DensityEstimate:
    point: np.ndarray
    radii: list
    values: list
    ci: list
    all_miss: list

    def to_json(self) -> dict:
        return {"point": list(map(float, self.point)), "radii": self.radii, "values": self.values,
                "ci": self.ci, "all_miss": self.all_miss}


def density_scan(E: MeasuredSet, p, r_min: float, r_max: float, samples: int, seed: int) -> DensityEstimate:
    """H^{k_m}(E & B(p,r)) / r^{k_m} over dyadic radii r_max * 2^{-j} >= r_min."""
    km = E.metric_dim
    radii = dyadic_radii(r_max, r_min)
    vals, cis, miss = [], [], []
    for j, r in enumerate(radii):
        est = ball_measure(E, p, r, samples, seed + j)
        vals.append(est.estimate / r ** km)
        cis.append(max(est.ci, 1e-300) / r ** km)
        miss.append(est.estimate == 0.0)
    return DensityEstimate(np.asarray(p, dtype=float), radii, vals, cis, miss)


def paraboloid_excess(E: MeasuredSet, p, V, lam: float, alpha: float, r: float,
                      samples: int, seed: int) -> Estimate:
    """r^{-k_m} H^{k_m}(E & B(p,r) minus Q_alpha(p,V,lam))."""
    H = Heisenberg(E.n)
    p = np.asarray(p, dtype=float)
    Q = Paraboloid(p, V, lam, alpha)

    def region(y):
        return (H.dist(y, p) < r) & ~in_paraboloid(y, Q)

    est = estimate_measure(E, region, samples, seed, ball=(p, r))
    km = E.metric_dim
    return Estimate(est.estimate / r ** km, est.ci / r ** km)


def cylinder_excess(E: MeasuredSet, p, V: VerticalSubgroup, eta: float, R: float,
                    samples: int, seed: int, scale: float | None = None) -> Estimate:
    """scale^{-k_m} H^{k_m}(E & B(p,R) minus p.C(V, eta)); scale defaults to R."""
    H = Heisenberg(E.n)
    p = np.asarray(p, dtype=float)

    def region(y):
        loc = H.mul(H.inv(p), y)
        return (H.hnorm(loc) < R) & (dist_to_vertical(loc, V) >= eta)

    est = estimate_measure(E, region, samples, seed, ball=(p, R))
    s = (R if scale is None else scale) ** E.metric_dim
    return Estimate(est.estimate / s, est.ci / s)


def upper_density_constant(E: MeasuredSet, points: Sequence, radii: Sequence, samples: int, seed: int) -> float:
    """Largest (estimate + ci) / r^{k_m} over the given centers and radii."""
    km = E.metric_dim
    best = 0.0
    for i, q in enumerate(points):
        for j, r in enumerate(radii):
            est = ball_measure(E, q, r, samples, seed + 1000 * i + j)
            best = max(best, (est.estimate + est.ci) / r ** km)
    return best


def loglog_slope(radii, values) -> float:
    """Least-squares slope of log(value) against log(r) over positive values.

    All-zero excess decays faster than any power and returns +inf.
    """
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    if keep.sum() == 0:
        return float("inf")
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(r[keep]), np.log(v[keep]), 1)[0])


class TangentScan(NamedTuple):
    best: object
    best_index: int
    decay_slope: float
    tie: bool
    excess: list
    ci: list


def tangent_scan(E: MeasuredSet, p, candidates: Sequence, lam: float, alpha: float,
                 r_grid: Sequence, samples: int, seed: int) -> TangentScan:
    """Pick the candidate with least excess at the smallest radius; ties within
    the combined ci are flagged, never silently broken."""
    if not candidates:
        raise ValueError("no candidates")
    r_grid = sorted(r_grid, reverse=True)
    rmin = r_grid[-1]
    at_min = [paraboloid_excess(E, p, V, lam, alpha, rmin, samples, seed) for V in candidates]
    order = sorted(range(len(candidates)), key=lambda i: at_min[i].estimate)
    best = order[0]
    tie = False
    if len(order) > 1:
        a, b = at_min[order[0]], at_min[order[1]]
        tie = abs(b.estimate - a.estimate) <= a.ci + b.ci
    ex, cis = [], []
    for j, r in enumerate(r_grid):
        e = paraboloid_excess(E, p, candidates[best], lam, alpha, r, samples, seed + 7919 * (j + 1))
        ex.append(e.estimate)
        cis.append(e.ci)
    return TangentScan(candidates[best], best, loglog_slope(r_grid, ex), tie, ex, cis)
