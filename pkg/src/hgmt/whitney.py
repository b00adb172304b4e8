"""Whitney hypothesis constants on finite data and the linearization defect."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .hgroup import Heisenberg

PAIR_BLOCK = 512


@dataclass(frozen=True)
class WhitneyData:
    """Points F, values f(F), horizontal gradients g(F) and an exponent alpha."""

    points: np.ndarray
    f: np.ndarray
    g: np.ndarray
    alpha: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] % 2 != 1 or pts.shape[1] < 3:
            raise ValueError("points must have shape (N, 2n+1)")
        if pts.shape[0] < 2:
            raise ValueError("need at least two points")
        f = np.asarray(self.f, dtype=float).reshape(-1)
        g = np.asarray(self.g, dtype=float)
        if f.shape != (pts.shape[0],) or g.shape != (pts.shape[0], pts.shape[1] - 1):
            raise ValueError("f must have one value and g one horizontal vector per point")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        for a in (pts, f, g):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite Whitney data")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return (self.points.shape[1] - 1) // 2

    def to_json(self) -> dict:
        return {"points": self.points.tolist(), "f": self.f.tolist(), "g": self.g.tolist(),
                "alpha": float(self.alpha)}

    @classmethod
    def from_json(cls, doc) -> "WhitneyData":
        return cls(doc["points"], doc["f"], doc["g"], float(doc["alpha"]))


class WhitneyConstants(NamedTuple):
    M2: float
    M3: float
    max_abs_f: float
    max_abs_g: float


def whitney_constant(D: WhitneyData) -> WhitneyConstants:
    """Exact pairwise maxima

    M2 = max |f(x) - f(y) - <g(x), (y^{-1} x)'>| / d(x, y)^{1+alpha}
    M3 = max |g(x) - g(y)| / d(x, y)^alpha

    over ordered pairs x != y.
    """
    H = Heisenberg(D.n)
    P, f, g, a = D.points, D.f, D.g, D.alpha
    N = P.shape[0]
    M2 = M3 = 0.0
    for s in range(0, N, PAIR_BLOCK):
        X = P[s:s + PAIR_BLOCK, None, :]
        # y^{-1} x for x in the block and every y
        rel = H.mul(H.inv(P[None, :, :]), X)
        d = H.hnorm(rel)
        idx = np.arange(s, min(s + PAIR_BLOCK, N))
        d[np.arange(idx.size), idx] = np.inf
        if np.any(d == 0):
            raise ValueError("duplicate points in Whitney data")
        lin = np.einsum("bi,bji->bj", g[idx], rel[..., :-1])
        r2 = np.abs(f[idx, None] - f[None, :] - lin) / d ** (1 + a)
        r3 = np.linalg.norm(g[idx, None, :] - g[None, :, :], axis=-1) / d ** a
        M2 = max(M2, float(r2.max()))
        M3 = max(M3, float(r3.max()))
    return WhitneyConstants(M2, M3, float(np.abs(f).max()), float(np.linalg.norm(g, axis=1).max()))


def linearization_defect(p, nu, E, radius: float, alpha: float) -> float:
    """sup |<nu, (p^{-1} q)'>| / d(p, q)^{1+alpha} over q in E with 0 < d(p,q) < radius."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    p = np.asarray(p, dtype=float)
    n = (p.shape[-1] - 1) // 2
    H = Heisenberg(n)
    E = np.atleast_2d(np.asarray(E, dtype=float))
    if E.shape[0] == 0:
        return 0.0
    rel = H.mul(H.inv(p), E)
    d = H.hnorm(rel)
    keep = (d > 0) & (d < radius)
    if not np.any(keep):
        return 0.0
    vals = np.abs(rel[keep, :-1] @ np.asarray(nu, dtype=float)) / d[keep] ** (1 + alpha)
    return float(vals.max())
