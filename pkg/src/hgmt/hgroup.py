"""Arithmetic of the Heisenberg group H^n in exponential coordinates.

Points are numpy arrays whose last axis has length 2n+1, ordered
(x_1..x_n, y_1..y_n, t).  Every operation broadcasts over leading axes, so a
stack of 10^6 points is handled in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised when an array does not have the shape required by the context."""


def symplectic_matrix(n: int) -> np.ndarray:
    """J with omega(u, v) = u @ J @ v = sum_i (u_i v_{i+n} - u_{i+n} v_i)."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def omega(u, v) -> np.ndarray:
    """Standard symplectic form on R^{2n}, broadcast over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = u.shape[-1] // 2
    return np.sum(u[..., :n] * v[..., n:] - u[..., n:] * v[..., :n], axis=-1)


@dataclass(frozen=True)
class Heisenberg:
    """Group context for H^n.

    ``tol`` is the relative tolerance used by exact-identity assertions; it is
    scaled by the largest operand magnitude (see :meth:`close`).
    """

    n: int
    tol: float = 1e-12

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    # -- validation -------------------------------------------------------
    def point(self, coords) -> np.ndarray:
        """Validate and return coordinates as a float array."""
        p = np.asarray(coords, dtype=float)
        if p.ndim == 0 or p.shape[-1] != self.dim:
            raise DimensionError(
                f"expected last axis of length {self.dim} for H^{self.n}, got shape {p.shape}"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("point coordinates must be finite")
        return p

    def check_finite(self, p) -> np.ndarray:
        """Validate shape only; finiteness is checked lazily by callers that need it."""
        p = np.asarray(p, dtype=float)
        if p.ndim == 0 or p.shape[-1] != self.dim:
            raise DimensionError(
                f"expected last axis of length {self.dim} for H^{self.n}, got shape {p.shape}"
            )
        return p

    def make(self, horizontal, t) -> np.ndarray:
        """Assemble points from first-layer vectors and vertical coordinates."""
        h = np.asarray(horizontal, dtype=float)
        t = np.asarray(t, dtype=float)
        if h.shape[-1] != 2 * self.n:
            raise DimensionError(f"horizontal part must have length {2 * self.n}")
        t = np.broadcast_to(t, h.shape[:-1])
        return np.concatenate([h, t[..., None]], axis=-1)

    # -- group structure --------------------------------------------------
    def mul(self, p, q) -> np.ndarray:
        p = self.check_finite(p)
        q = self.check_finite(q)
        n = self.n
        out_h = p[..., :-1] + q[..., :-1]
        s = p[..., :n] * q[..., n:2 * n] - p[..., n:2 * n] * q[..., :n]
        out_t = p[..., -1] + q[..., -1] - 2.0 * np.sum(s, axis=-1)
        return np.concatenate([out_h, out_t[..., None]], axis=-1)

    def inv(self, p) -> np.ndarray:
        return -self.check_finite(p)

    def dilate(self, r, p) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("dilation factor must be positive")
        p = self.check_finite(p)
        r = r[..., None] if r.ndim else r
        out = p.copy()
        out[..., :-1] = r * p[..., :-1]
        out[..., -1:] = (r * r) * p[..., -1:]
        return out

    def translate(self, z, p) -> np.ndarray:
        """Left translation tau_z(p) = z . p."""
        return self.mul(z, p)

    # -- metric -------------------------------------------------------------
    def hnorm(self, p) -> np.ndarray:
        """Max-gauge max(||p'||, |t|^{1/2})."""
        p = self.check_finite(p)
        return np.maximum(np.linalg.norm(p[..., :-1], axis=-1), np.sqrt(np.abs(p[..., -1])))

    def dist(self, p, q) -> np.ndarray:
        return self.hnorm(self.mul(self.inv(q), p))

    def pi1(self, p) -> np.ndarray:
        """Projection onto the first layer."""
        return self.check_finite(p)[..., :-1]

    # -- tolerance helpers -------------------------------------------------
    def close(self, a, b, *operands) -> bool:
        """True iff a == b to ``tol`` relative to the largest operand magnitude."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        scale = max([1.0, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0))]
                    + [float(np.max(np.abs(np.asarray(o)), initial=0.0)) for o in operands])
        return bool(np.max(np.abs(a - b), initial=0.0) <= self.tol * scale)

    def random_points(self, rng: np.random.Generator, size, scale: float = 1.0) -> np.ndarray:
        """Gaussian points with first layer at ``scale`` and vertical part at ``scale**2``."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        p = rng.standard_normal(shape + (self.dim,))
        p[..., :-1] *= scale
        p[..., -1] *= scale * scale
        return p
