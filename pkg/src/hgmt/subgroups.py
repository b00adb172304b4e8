"""Homogeneous subgroups of H^n, semidirect splittings and H-linear maps.

A homogeneous subgroup is stored through the first-layer part of its Lie
algebra:

* a *horizontal* subgroup is exp(U) for an isotropic subspace U of R^{2n};
* a *vertical* subgroup is exp(W + R T): it always contains the center, so only
  the first-layer part W is stored.

Bases are stored as rows, orthonormal to working precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .hgroup import Heisenberg, omega, symplectic_matrix
from .optimize import OptimizerOptions, multistart_minimize

ORTHO_TOL = 1e-10


class SubgroupError(ValueError):
    pass


def orthonormal_rows(vectors, tol: float = 1e-12) -> np.ndarray:
    """Orthonormalize rows by QR with a positive-diagonal sign convention.

    The result depends continuously on the input, which keeps derived bases
    (complements, kernels) locally Lipschitz.
    """
    a = np.atleast_2d(np.asarray(vectors, dtype=float))
    if a.shape[0] == 0:
        return a.reshape(0, a.shape[-1])
    q, r = np.linalg.qr(a.T)
    d = np.diag(r)
    if np.any(np.abs(d) <= tol * max(1.0, float(np.max(np.abs(a))))):
        raise SubgroupError("vectors are linearly dependent")
    return (q * np.sign(d)).T


def _check_orthonormal(basis: np.ndarray, what: str):
    if basis.shape[0] == 0:
        return
    gram = basis @ basis.T
    if np.max(np.abs(gram - np.eye(basis.shape[0]))) > ORTHO_TOL:
        raise SubgroupError(f"{what} basis is not orthonormal")


def _as_basis(n: int, basis) -> np.ndarray:
    b = np.asarray(basis, dtype=float)
    if b.size == 0:
        return np.zeros((0, 2 * n))
    b = np.atleast_2d(b)
    if b.shape[1] != 2 * n:
        raise SubgroupError(f"basis vectors must have length {2 * n}")
    if not np.all(np.isfinite(b)):
        raise SubgroupError("basis must be finite")
    return b


@dataclass(frozen=True, eq=False)
class HorizontalSubgroup:
    n: int
    basis: np.ndarray

    def __post_init__(self):
        b = _as_basis(self.n, self.basis)
        if b.shape[0] > self.n:
            raise SubgroupError("a horizontal subgroup has dimension at most n")
        _check_orthonormal(b, "horizontal")
        if b.shape[0] > 1:
            iso = b @ symplectic_matrix(self.n) @ b.T
            if np.max(np.abs(iso)) > ORTHO_TOL:
                raise SubgroupError("horizontal basis is not isotropic")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_span(cls, n: int, vectors) -> "HorizontalSubgroup":
        return cls(n, orthonormal_rows(_as_basis(n, vectors)))

    kind = "horizontal"

    @property
    def dim(self) -> int:
        """Linear (= metric) dimension."""
        return self.basis.shape[0]

    @property
    def metric_dim(self) -> int:
        return self.dim

    @property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def contains(self, p, tol: float = 1e-10) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        h = p[..., :-1]
        off = h - h @ self.projector
        return (np.linalg.norm(off, axis=-1) <= tol) & (np.abs(p[..., -1]) <= tol)

    def to_json(self) -> dict:
        return {"kind": "horizontal", "n": self.n, "basis": (self.basis + 0.0).tolist()}


@dataclass(frozen=True, eq=False)
class VerticalSubgroup:
    n: int
    wbasis: np.ndarray

    def __post_init__(self):
        b = _as_basis(self.n, self.wbasis)
        if b.shape[0] > 2 * self.n:
            raise SubgroupError("too many first-layer vectors")
        _check_orthonormal(b, "vertical")
        b.setflags(write=False)
        object.__setattr__(self, "wbasis", b)

    @classmethod
    def from_span(cls, n: int, vectors) -> "VerticalSubgroup":
        return cls(n, orthonormal_rows(_as_basis(n, vectors)))

    kind = "vertical"

    @property
    def basis(self) -> np.ndarray:
        return self.wbasis

    @property
    def dim(self) -> int:
        """Linear dimension k (first-layer part plus the center)."""
        return self.wbasis.shape[0] + 1

    @property
    def metric_dim(self) -> int:
        return self.dim + 1

    @property
    def projector(self) -> np.ndarray:
        return self.wbasis.T @ self.wbasis

    @property
    def perp_projector(self) -> np.ndarray:
        """Euclidean projector onto the orthogonal complement of W in R^{2n}."""
        return np.eye(2 * self.n) - self.projector

    def contains(self, p, tol: float = 1e-10) -> np.ndarray:
        return dist_to_vertical(p, self) <= tol

    def to_json(self) -> dict:
        return {"kind": "vertical", "n": self.n, "basis": (self.wbasis + 0.0).tolist()}


def subgroup_from_json(doc) -> HorizontalSubgroup | VerticalSubgroup:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        kind, n, basis = doc["kind"], int(doc["n"]), doc["basis"]
    except (KeyError, TypeError) as exc:
        raise SubgroupError(f"malformed subgroup document: {exc}") from None
    if kind == "vertical":
        return VerticalSubgroup.from_span(n, basis) if len(basis) else VerticalSubgroup(n, basis)
    if kind == "horizontal":
        return HorizontalSubgroup.from_span(n, basis)
    raise SubgroupError(f"unknown subgroup kind {kind!r}")


def same_subgroup(a, b, tol: float = 1e-9) -> bool:
    if a.kind != b.kind or a.n != b.n or a.dim != b.dim:
        return False
    return bool(np.max(np.abs(a.projector - b.projector), initial=0.0) <= tol)


# ---------------------------------------------------------------------------
# decompositions


@dataclass(frozen=True, eq=False)
class Decomposition:
    """H^n = T x| S with T vertical (normal) and S horizontal."""

    T: VerticalSubgroup
    S: HorizontalSubgroup
    _coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.T.n
        if self.S.n != n:
            raise SubgroupError("subgroups live in different groups")
        d, m = self.T.wbasis.shape[0], self.S.basis.shape[0]
        if d + m != 2 * n:
            raise SubgroupError(f"dimensions {d}+{m} do not split R^{2 * n}")
        stacked = np.vstack([self.T.wbasis, self.S.basis])
        if np.linalg.matrix_rank(stacked, tol=1e-10) < 2 * n:
            raise SubgroupError("subgroups are not complementary")
        # p' = coef @ stacked  =>  coef = p' @ inv(stacked)
        object.__setattr__(self, "_coef", np.linalg.inv(stacked))

    @property
    def n(self) -> int:
        return self.T.n

    def horizontal_component(self, h) -> np.ndarray:
        """S-component u of first-layer vectors under R^{2n} = W + U."""
        d = self.T.wbasis.shape[0]
        coef = np.asarray(h, dtype=float) @ self._coef
        return coef[..., d:] @ self.S.basis

    @property
    def margin(self) -> float:
        """Smallest cosine between S and the Euclidean orthogonal of W.

        Equals inf d(p, T) / ||pi_S(p)||, i.e. the exact sandwich constant.
        """
        if self.S.dim == 0:
            return 1.0
        g = self.S.basis @ self.T.perp_projector
        return float(np.linalg.svd(g, compute_uv=False)[-1])

    def pi_S(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        u = self.horizontal_component(p[..., :-1])
        return np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], axis=-1)

    def pi_T(self, p) -> np.ndarray:
        H = Heisenberg(self.n)
        return H.mul(p, H.inv(self.pi_S(p)))

    def to_json(self) -> dict:
        return {"T": self.T.to_json(), "S": self.S.to_json()}


def split(p, D: Decomposition) -> tuple[np.ndarray, np.ndarray]:
    """Unique factorization p = t . s with t in T and s in S."""
    s = D.pi_S(p)
    H = Heisenberg(D.n)
    t = H.mul(p, H.inv(s))
    return t, s


# ---------------------------------------------------------------------------
# distances


def dist_to_vertical(p, T: VerticalSubgroup) -> np.ndarray:
    """d(p, T): the center absorbs the vertical coordinate, leaving the Euclidean
    distance of p' to W."""
    h = np.asarray(p, dtype=float)[..., :-1]
    if h.shape[-1] != 2 * T.n:
        raise SubgroupError("point and subgroup dimensions differ")
    return np.linalg.norm(h @ T.perp_projector, axis=-1)


class HorizontalDistance(NamedTuple):
    value: float
    argmin: np.ndarray
    converged: bool


def _horizontal_objective(p: np.ndarray, B: np.ndarray, n: int):
    h, t = p[:-1], p[-1]

    def fun(c):
        u = np.asarray(c) @ B
        return max(float(np.linalg.norm(u - h)), float(np.sqrt(abs(t - 2.0 * omega(h, u)))))

    return fun


def dist_to_horizontal(p, S: HorizontalSubgroup, opts: OptimizerOptions = OptimizerOptions(),
                       full: bool = False):
    """inf over s in S of ||p^{-1} s||, by multi-start Nelder-Mead over S's coordinates."""
    p = np.asarray(p, dtype=float)
    if p.shape != (2 * S.n + 1,):
        raise SubgroupError("dist_to_horizontal takes a single point")
    H = Heisenberg(S.n)
    m = S.dim
    if m == 0:
        val = float(H.hnorm(p))
        res = HorizontalDistance(val, np.zeros(0), True)
        return res if full else val
    fun = _horizontal_objective(p, S.basis, S.n)
    scale = max(float(H.hnorm(p)), 1e-12)
    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(m)] + [scale * rng.standard_normal(m) for _ in range(max(opts.starts - 1, 0))]
    r = multistart_minimize(fun, starts, opts)
    # e is in S, so the infimum never exceeds ||p||
    val = min(r.fun, float(H.hnorm(p)))
    res = HorizontalDistance(val, r.x @ S.basis, r.converged)
    return res if full else val


# ---------------------------------------------------------------------------
# sandwich inequality


class SandwichResult(NamedTuple):
    c_lo: float
    ok: bool
    counterexample: np.ndarray | None
    c_exact: float
    violations: int


def sandwich_constant(D: Decomposition, sample_count: int, seed: int,
                      block: int = 1 << 17) -> SandwichResult:
    """Check d(p,T) <= ||pi_S(p)|| on seeded samples and report inf d(p,T)/||pi_S(p)||."""
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    H = Heisenberg(D.n)
    ss = np.random.SeedSequence(seed)
    c_lo = np.inf
    violations = 0
    counter = None
    done = 0
    for child in ss.spawn((sample_count + block - 1) // block):
        size = min(block, sample_count - done)
        rng = np.random.default_rng(child)
        p = H.random_points(rng, size)
        lhs = dist_to_vertical(p, D.T)
        rhs = H.hnorm(D.pi_S(p))
        bad = lhs > rhs * (1 + 1e-12) + 1e-15
        if np.any(bad):
            violations += int(bad.sum())
            if counter is None:
                counter = p[np.argmax(bad)]
        keep = rhs > 1e-12
        if np.any(keep):
            c_lo = min(c_lo, float(np.min(lhs[keep] / rhs[keep])))
        done += size
    if not np.isfinite(c_lo):
        c_lo = 1.0
    return SandwichResult(c_lo, violations == 0, counter, D.margin, violations)


# ---------------------------------------------------------------------------
# horizontal complements


def _perp_basis(W: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of W^perp chosen continuously: project pivoted coordinate
    axes and orthonormalize."""
    P = np.eye(2 * n) - W.T @ W
    m = 2 * n - W.shape[0]
    if m == 0:
        return np.zeros((0, 2 * n))
    from scipy.linalg import qr

    _, _, piv = qr(P, pivoting=True)
    cols = np.sort(piv[:m])
    return orthonormal_rows(P[:, cols].T)


def _symplectic_gram_schmidt(W: np.ndarray, V: np.ndarray, n: int):
    """u_j = v_j + w_j with w_j in W the least-norm correction cancelling the
    symplectic pairings with u_1..u_{j-1}.  Returns None when it degenerates."""
    J = symplectic_matrix(n)
    us = []
    for v in V:
        if us:
            U = np.array(us)
            A = U @ J @ W.T
            b = -(U @ J @ v)
            a, *_ = np.linalg.lstsq(A, b, rcond=None)
            if np.max(np.abs(A @ a - b)) > 1e-10:
                return None
            v = v + a @ W
        us.append(v)
    return np.array(us)


def _lagrangian_candidates(n: int) -> list[np.ndarray]:
    cands = []
    for mask in range(2 ** n):
        rows = []
        for i in range(n):
            e = np.zeros(2 * n)
            e[i + n if (mask >> i) & 1 else i] = 1.0
            rows.append(e)
        cands.append(np.array(rows))
    rng = np.random.default_rng(20240531)
    for _ in range(32):
        A = rng.standard_normal((n, n))
        Ssym = (A + A.T) / 2
        cands.append(orthonormal_rows(np.hstack([np.eye(n), Ssym])))
    return cands


def _margin(U: np.ndarray, Pperp: np.ndarray) -> float:
    return float(np.linalg.svd(U @ Pperp, compute_uv=False)[-1])


def horizontal_complement(T: VerticalSubgroup) -> HorizontalSubgroup:
    """Isotropic complement of the first layer of T, deterministic in T.

    Candidates: the symplectic Gram-Schmidt of W^perp (wins whenever W^perp is
    already isotropic), then subspaces of fixed Lagrangians.  The candidate best
    separated from W is kept; its basis is the graph of W^perp over the
    complement, orthonormalized.
    """
    n = T.n
    W = T.wbasis
    d = W.shape[0]
    if not (n <= d <= 2 * n - 1):
        raise SubgroupError("horizontal complements need n+1 <= k <= 2n")
    m = 2 * n - d
    Pperp = np.eye(2 * n) - W.T @ W
    V = _perp_basis(W, n)
    J = symplectic_matrix(n)

    best, best_margin = None, -1.0
    gs = _symplectic_gram_schmidt(W, V, n)
    if gs is not None:
        try:
            U = orthonormal_rows(gs)
            if np.max(np.abs(U @ J @ U.T), initial=0.0) <= 1e-10:
                best, best_margin = U, _margin(U, Pperp)
        except SubgroupError:
            pass
    for L in _lagrangian_candidates(n):
        G = L @ Pperp
        left, sv, _ = np.linalg.svd(G, full_matrices=False)
        if sv[m - 1] > best_margin + 1e-12:
            U = orthonormal_rows(left[:, :m].T @ L)
            best, best_margin = U, float(sv[m - 1])
    if best is None or best_margin < 1e-8:
        raise SubgroupError("symplectic Gram-Schmidt degenerated: no isotropic complement found")

    # canonical basis: U-components of the W^perp basis, then orthonormalized
    coef = V @ np.linalg.inv(np.vstack([W, best]))
    graph = coef[:, d:] @ best
    return HorizontalSubgroup(n, orthonormal_rows(graph))


def canonical_decomposition(T: VerticalSubgroup) -> Decomposition:
    return Decomposition(T, horizontal_complement(T))


def kernel_hyperplanes(T: VerticalSubgroup, S: HorizontalSubgroup) -> list[VerticalSubgroup]:
    """N(nu_j) = exp(span{t, nu_i : i != j}), one codimension-one vertical per nu_j."""
    Decomposition(T, S)  # validates complementarity
    out = []
    for j in range(S.dim):
        rows = [T.wbasis] + [S.basis[[i]] for i in range(S.dim) if i != j]
        out.append(VerticalSubgroup.from_span(T.n, np.vstack(rows)))
    inter = intersect_verticals(out)
    if inter.dim != T.dim or not same_subgroup(inter, T, tol=1e-8):
        raise SubgroupError("kernel hyperplanes do not intersect in T")
    return out


def intersect_verticals(groups) -> VerticalSubgroup:
    """Intersection of vertical subgroups (first layers intersect, center kept)."""
    n = groups[0].n
    normals = [np.eye(2 * n) - g.projector for g in groups]
    stacked = np.vstack(normals)
    _, s, vt = np.linalg.svd(stacked)
    rank = int(np.sum(s > 1e-9))
    null = vt[rank:]
    return VerticalSubgroup(n, null) if null.shape[0] else VerticalSubgroup(n, np.zeros((0, 2 * n)))


# ---------------------------------------------------------------------------
# H-linear maps


@dataclass(frozen=True, eq=False)
class HLinearMap:
    """Homogeneous homomorphism H^n -> R^r, acting on the first layer only."""

    matrix: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if A.shape[1] % 2:
            raise SubgroupError("matrix must act on R^{2n}")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def n(self) -> int:
        return self.matrix.shape[1] // 2

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.matrix, tol=1e-10))

    def __call__(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float)[..., :-1] @ self.matrix.T


def hlinear_kernel(L: HLinearMap) -> VerticalSubgroup:
    rows = L.matrix.shape[0]
    if L.rank < rows:
        raise SubgroupError("H-linear map is rank deficient")
    n = L.n
    if rows == 2 * n:
        return VerticalSubgroup(n, np.zeros((0, 2 * n)))
    # continuous canonical basis of the null space
    return VerticalSubgroup.from_span(n, _perp_basis(orthonormal_rows(L.matrix), n))


def hlinear_injectivity_constant(L: HLinearMap, V: HorizontalSubgroup) -> float:
    """Smallest c with ||L v|| >= c ||v|| on span(V)."""
    if V.dim == 0:
        raise SubgroupError("empty subgroup")
    s = np.linalg.svd(L.matrix @ V.basis.T, compute_uv=False)
    c = float(s[-1]) if s.size >= V.dim else 0.0
    if c <= 1e-12:
        raise SubgroupError("L is not injective on V")
    return c
