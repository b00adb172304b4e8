"""Independent brute-force references used by the tests."""

import itertools

import numpy as np


def zoom_grid_min(fun, center, halfwidth, levels=40, pts=9, shrink=0.6):
    """Minimize a vectorized fun over R^d by repeatedly re-centered, shrinking grids."""
    center = np.asarray(center, dtype=float)
    d = center.size
    axis = np.linspace(-1.0, 1.0, pts)
    offsets = np.array(list(itertools.product(axis, repeat=d)))
    best_x, best = center, float(fun(center[None])[0])
    w = float(halfwidth)
    for _ in range(levels):
        cand = best_x + w * offsets
        vals = fun(cand)
        i = int(np.argmin(vals))
        if vals[i] <= best:
            best, best_x = float(vals[i]), cand[i]
        w *= shrink
    return best, best_x


def _inner_min_s(rel_h_norm, base_t, halfwidth, levels=48, pts=9, shrink=0.5):
    """For each row, min over s of max(a, sqrt|s - base_t|) by a 1-D zoom grid in s."""
    m = rel_h_norm.size
    axis = np.linspace(-1.0, 1.0, pts)
    center = np.zeros(m)
    best = np.maximum(rel_h_norm, np.sqrt(np.abs(center - base_t)))
    w = halfwidth
    for _ in range(levels):
        cand = center[:, None] + w * axis[None, :]
        vals = np.maximum(rel_h_norm[:, None], np.sqrt(np.abs(cand - base_t[:, None])))
        i = np.argmin(vals, axis=1)
        v = vals[np.arange(m), i]
        upd = v <= best
        best = np.where(upd, v, best)
        center = np.where(upd, cand[np.arange(m), i], center)
        w *= shrink
    return best


def brute_dist_vertical(p, W):
    """inf over t in exp(span W + center) of ||p^{-1} t||.

    Nested grid search: outer zoom grid over the W-coefficients, inner 1-D zoom
    over the center coordinate s for every outer candidate.
    """
    n = (p.size - 1) // 2
    d = W.shape[0]
    s_scale = 2 * max(1.0, float(np.abs(p).max())) ** 2

    def fun(c):
        w = c @ W if d else np.zeros((len(c), 2 * n))
        rel_h = w - p[:-1]
        om = np.sum(-p[:n] * w[:, n:] + p[n:-1] * w[:, :n], axis=1)
        # (p^{-1} t)_t = s - p_t - 2 omega(-p', w): zero at s = p_t + 2 omega(-p', w)
        return _inner_min_s(np.linalg.norm(rel_h, axis=1), p[-1] - 2 * om, s_scale)

    if d == 0:
        return float(fun(np.zeros((1, 0)))[0])
    c_scale = 2 * max(1.0, float(np.linalg.norm(p[:-1])))
    return zoom_grid_min(fun, np.zeros(d), c_scale, levels=40, pts=7 if d == 3 else 9)[0]


def brute_dist_horizontal(p, B):
    """inf over s in exp(span B) of ||p^{-1} s|| by grid search over coefficients.

    (p^{-1} s)_t is affine in the coefficients c.  For two coefficients the grid is
    rotated so that it depends on c_1 only: an outer 1-D zoom over c_1 and, for each
    outer candidate, an inner 1-D zoom over c_2.
    """
    n = (p.size - 1) // 2
    m = B.shape[0]
    scale = 2 * max(1.0, float(np.abs(p).max()))

    def parts(c):
        u = c @ B
        om = np.sum(p[:n] * u[..., n:] - p[n:-1] * u[..., :n], axis=-1)
        return np.linalg.norm(u - p[:-1], axis=-1), np.sqrt(np.abs(p[-1] - 2 * om))

    def fun(c):
        a, b = parts(c)
        return np.maximum(a, b)

    if m == 1:
        return zoom_grid_min(fun, np.zeros(1), scale, levels=80, pts=41)[0]
    # gradient of the affine t-part in coefficient space
    E = np.eye(m)
    u = E @ B
    v = -2 * np.sum(p[:n] * u[:, n:] - p[n:-1] * u[:, :n], axis=1)
    if np.linalg.norm(v) < 1e-14:
        R = E
    else:
        a = v / np.linalg.norm(v)
        R = np.array([a, [-a[1], a[0]]])
    axis = np.linspace(-1.0, 1.0, 17)

    def outer(c1):
        c1 = c1[:, 0]
        center = np.zeros(c1.size)
        w = scale
        best = np.full(c1.size, np.inf)
        for _ in range(50):
            c2 = center[:, None] + w * axis[None, :]
            coef = c1[:, None, None] * R[0] + c2[..., None] * R[1]
            vals = fun(coef)
            i = np.argmin(vals, axis=1)
            val = vals[np.arange(c1.size), i]
            upd = val <= best
            best = np.where(upd, val, best)
            center = np.where(upd, c2[np.arange(c1.size), i], center)
            w *= 0.5
        return best

    return zoom_grid_min(outer, np.zeros(1), scale, levels=50, pts=17)[0]


def _linear_quadratic(S):
    """pi_S(h, 0) = (h A, q(h)) with q quadratic; recover A and sym(q) by polarization."""
    from hgmt.grassmannian import canonical_perp
    from hgmt.subgroups import Decomposition, VerticalSubgroup

    n = S.n
    if isinstance(S, VerticalSubgroup):
        proj = Decomposition(S, canonical_perp(S)).pi_T
    else:
        proj = Decomposition(canonical_perp(S), S).pi_S
    E = np.eye(2 * n)
    lift = lambda h: np.concatenate([h, np.zeros((len(h), 1))], axis=1)
    A = proj(lift(E))[:, :-1]
    q = lambda h: proj(lift(h))[:, -1]
    qi = q(E)
    pair = (E[:, None, :] + E[None, :, :]).reshape(-1, 2 * n)
    Mq = (q(pair).reshape(2 * n, 2 * n) - qi[:, None] - qi[None, :]) / 2
    return A, Mq


def rho_closed_form(S1, S2):
    """rho between two elements of the same class.

    The t-parts of the two projections differ by a quantity independent of t,
    so the maximum sits on the side face |x'| = 1 and equals
    max(sigma_max(A1 - A2), sqrt(max |eig M|)) with
    M = sym(q1 - q2 + 2 A2 J A1^T).
    """
    from hgmt.hgroup import symplectic_matrix

    J = symplectic_matrix(S1.n)
    A1, Q1 = _linear_quadratic(S1)
    A2, Q2 = _linear_quadratic(S2)
    M = Q1 - Q2 + 2 * A2 @ J @ A1.T
    M = (M + M.T) / 2
    return max(np.linalg.norm(A1 - A2, 2), float(np.sqrt(np.abs(np.linalg.eigvalsh(M)).max())))


def rho_sampled(S1, S2, rng, size=200_000):
    """Lower bound on rho from random points of the gauge sphere."""
    from hgmt.grassmannian import canonical_perp
    from hgmt.hgroup import Heisenberg
    from hgmt.subgroups import Decomposition, VerticalSubgroup

    n = S1.n
    H = Heisenberg(n)
    p = H.random_points(rng, size)
    p = H.dilate(1.0 / H.hnorm(p), p)

    def proj(S):
        if isinstance(S, VerticalSubgroup):
            return Decomposition(S, canonical_perp(S)).pi_T(p)
        return Decomposition(canonical_perp(S), S).pi_S(p)

    return float(H.dist(proj(S1), proj(S2)).max())


def quadrature_ball_measure(patch, q, r, nodes_per_axis):
    """Parameter measure of patch & B(q, r) by a midpoint rule on the c-box.

    For fixed c the condition on t is |t + const(c)| <= r^2 plus a first-layer
    condition independent of t, so the t-length is computed exactly.
    """
    from hgmt.hgroup import Heisenberg

    V = patch.V
    n = V.n
    H = Heisenberg(n)
    q = np.asarray(q, dtype=float)
    cb = patch.box[:-1]
    axes = [lo + (np.arange(nodes_per_axis) + 0.5) * (hi - lo) / nodes_per_axis for lo, hi in cb]
    C = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))
    cell = np.prod((cb[:, 1] - cb[:, 0]) / nodes_per_axis)
    h = C @ V.wbasis
    if patch.profile is not None:
        h = h + patch.profile(C, patch.N.shape[0]) @ patch.N
    y0 = H.mul(patch.anchor, np.concatenate([h, np.zeros((len(C), 1))], axis=1))
    u = H.mul(H.inv(q), y0)
    first_ok = np.linalg.norm(u[:, :-1], axis=1) < r
    # left translation by (0, t) adds t to the last coordinate of q^{-1} y
    lo = np.maximum(-r * r - u[:, -1], patch.box[-1, 0])
    hi = np.minimum(r * r - u[:, -1], patch.box[-1, 1])
    length = np.where(first_ok, np.maximum(hi - lo, 0.0), 0.0)
    return float(length.sum() * cell)
