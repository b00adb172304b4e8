"""End-to-end lemma verifications producing VerificationReports."""

from __future__ import annotations

import time

import numpy as np

from ..grassmannian import rho
from ..hgroup import Heisenberg
from ..measure import (
    ball_measure,
    cylinder_excess,
    dyadic_radii,
    paraboloid_excess,
    tangent_scan,
    upper_density_constant,
)
from ..optimize import OptimizerOptions
from ..parabolic import (
    Paraboloid,
    annulus_inclusion_check,
    in_paraboloid,
    near_axis,
    tube_axis,
    tube_radius,
)
from ..report import VerificationReport
from ..subgroups import (
    SubgroupError,
    VerticalSubgroup,
    canonical_decomposition,
    dist_to_vertical,
    horizontal_complement,
    kernel_hyperplanes,
    same_subgroup,
    sandwich_constant,
    subgroup_from_json,
)
from .scenes import ConfigError, build_set, rotated_vertical, seed_override, validate_config

# rho inside the verifications: coarser grid, one polish start per face
HARNESS_OPTS = OptimizerOptions(grid_n1=32, grid_n2=10, polish_side=1, polish_cap=1)


def _vertical(doc) -> VerticalSubgroup:
    V = subgroup_from_json(doc)
    if not isinstance(V, VerticalSubgroup):
        raise ConfigError("expected a vertical subgroup")
    return V


def _sample_block(sampler, keep, size, max_rounds=200):
    """Rejection sampling: draw from ``sampler(m)`` until ``size`` points pass ``keep``."""
    got, total = [], 0
    for _ in range(max_rounds):
        z = sampler(max(2 * (size - total), 1024))
        z = z[keep(z)]
        got.append(z)
        total += len(z)
        if total >= size:
            break
    out = np.concatenate(got)[:size]
    return out


# ---------------------------------------------------------------------------


def verify_cylinder_paraboloid(cfg: dict) -> VerificationReport:
    """Annulus inclusion on the dyadic grid plus, with a set, the measure form."""
    p = cfg["params"]
    seed = seed_override(cfg["seed"])
    V = _vertical(p["V"])
    n = V.n
    H = Heisenberg(n)
    alpha, lam = float(p["alpha"]), float(p["lambda"])
    lp = float(p.get("lambda_prime", 4.0 ** (1 + alpha) * lam))
    levels = int(p.get("levels", 11))
    radii = dyadic_radii(float(p["r_max"]), count=levels)
    total = int(p.get("annulus_samples", 1_000_000))
    x = H.point(p.get("x", H.identity))
    rep = VerificationReport("cylinder_paraboloid")
    rep.params = {"n": n, "k": V.dim, "k_m": V.metric_dim, "alpha": alpha, "lambda": lam,
                  "lambda_prime": lp, "lambda_prime_default": 4.0 ** (1 + alpha) * lam,
                  "radii": radii, "annulus_samples": total, "seed": seed}
    per = max(total // len(radii), 2)
    viol = []
    for j, r in enumerate(radii):
        a = annulus_inclusion_check(x, V, lam, alpha, r, per, seed + j, lam_prime=lp)
        viol.append(a.violations)
    rep.violations = int(sum(viol))
    rep.add("annulus_violations_per_radius", viol)

    if "set" in p:
        E = build_set(p["set"])
        ns = int(p.get("mc_samples", 100_000))
        km = V.metric_dim
        cyl, cyl_ci, par, par_ci = [], [], [], []
        for j, r in enumerate(radii):
            c = cylinder_excess(E, x, V, lam * r ** (1 + alpha), r, ns, seed + 100 + j)
            q = paraboloid_excess(E, x, V, lp, alpha, r, ns, seed + 200 + j)
            cyl.append(c.estimate)
            cyl_ci.append(c.ci)
            par.append(q.estimate)
            par_ci.append(q.ci)
        jmax = int(np.argmax(cyl))
        eps = cyl[jmax]
        bound = eps / (1 - 2.0 ** (-km))
        slack = [bound + 3 * (par_ci[j] + cyl_ci[jmax] / (1 - 2.0 ** (-km))) - par[j]
                 for j in range(len(radii))]
        ok = all(s >= 0 for s in slack)
        rep.params["mc_samples"] = ns
        rep.add("epsilon", eps, cyl_ci[jmax])
        rep.add("paraboloid_bound", bound)
        rep.add("cylinder_excess", cyl, cyl_ci)
        rep.add("paraboloid_excess", par, par_ci)
        rep.add("min_slack", float(min(slack)))
        rep.criteria_met = bool(ok)
    return rep


def verify_tube(cfg: dict) -> VerificationReport:
    """Sampled inclusion C(S,eta) & C(T,eta) inside C(Z, 3 n eta / (ell theta))."""
    p = cfg["params"]
    seed = seed_override(cfg["seed"])
    S, T = _vertical(p["S"]), _vertical(p["T"])
    eta = float(p["eta"])
    R = float(p.get("radius", 1.0))
    samples = int(p.get("samples", 1_000_000))
    scale = float(p.get("target_scale", 1.0))
    n = S.n
    H = Heisenberg(n)
    rep = VerificationReport("tube")
    rep.params = {"n": n, "k": S.dim, "eta": eta, "radius": R, "samples": samples, "seed": seed,
                  "target_scale": scale}
    try:
        ax = tube_axis(S, T, HARNESS_OPTS)
    except SubgroupError as exc:
        rep.hypotheses_met = False
        rep.criteria_met = False
        rep.notes.append(f"precondition failed: {exc}")
        return rep
    target = scale * tube_radius(n, eta, ax.ell, ax.theta)
    rep.params.update({"theta": ax.theta, "ell": ax.ell, "sigma": ax.sigma,
                       "target_radius": target, "Z": ax.Z.to_json(), "e": ax.e})
    rng = np.random.default_rng(seed)

    def inside_both(z):
        return ((dist_to_vertical(z, S) < eta) & (dist_to_vertical(z, T) < eta)
                & (H.hnorm(z) < R))

    # half from the S-band (where the intersection lives), half from the T-band
    z1 = _sample_block(lambda m: near_axis(rng, S, m, R, eta), inside_both, samples // 2)
    z2 = _sample_block(lambda m: near_axis(rng, T, m, R, eta), inside_both, samples - samples // 2)
    z = np.concatenate([z1, z2])
    dz = dist_to_vertical(z, ax.Z)
    bad = dz >= target
    rep.violations = int(bad.sum())
    rep.add("sampled", int(len(z)))
    rep.add("max_dist_to_Z", float(dz.max()))
    rep.add("ratio_to_target", float(dz.max() / target))
    return rep


def verify_separation(cfg: dict) -> VerificationReport:
    """B(q,r/2) & q.C(V_q, lam (r/2)^{1+alpha}) inside B(p,2r) minus Q_alpha(p,V_p,lam)."""
    prm = cfg["params"]
    seed = seed_override(cfg["seed"])
    Vp, Vq = _vertical(prm["V_p"]), _vertical(prm["V_q"])
    n = Vp.n
    H = Heisenberg(n)
    alpha, lam = float(prm["alpha"]), float(prm["lambda"])
    p, q = H.point(prm["p"]), H.point(prm["q"])
    r = float(H.dist(p, q))
    samples = int(prm.get("samples", 1_000_000))
    theta = rho(Vp, Vq, HARNESS_OPTS)
    C = float(prm.get("C", max(theta / r ** alpha, 1e-12)))
    if "c" in prm:
        c = float(prm["c"])
    else:
        sw = sandwich_constant(canonical_decomposition(Vp), int(prm.get("sandwich_samples", 100_000)), seed)
        c = float(sw.c_lo)
    formula = (2 ** alpha * c * C + (1 + 3 ** (1 + alpha)) * lam) / (2 ** (1 + alpha) * c)
    lp = float(prm.get("lambda_prime", formula))
    rep = VerificationReport("separation")
    rep.params = {"n": n, "k": Vp.dim, "alpha": alpha, "lambda": lam, "r": r, "theta": theta,
                  "C": C, "c": c, "lambda_prime": lp, "lambda_prime_formula": formula,
                  "samples": samples, "seed": seed}
    rho_ok = theta <= C * r ** alpha * (1 + 1e-9)
    q_out = not bool(in_paraboloid(q, Paraboloid(p, Vp, lp, alpha)))
    lp_ok = lp >= formula * (1 - 1e-12)
    rep.add("rho_ratio", theta / (C * r ** alpha))
    if not (rho_ok and q_out):
        rep.hypotheses_met = False
        rep.criteria_met = False
        rep.notes.append("precondition rejected: " + ", ".join(
            s for s, ok in (("rho(V_p,V_q) > C r^alpha", rho_ok), ("q inside Q_alpha(p,V_p,lambda')", q_out))
            if not ok))
        return rep
    if not lp_ok:
        rep.hypotheses_met = False
        rep.notes.append("lambda' below the admissible value; violations do not contradict the lemma")

    eta = lam * (r / 2) ** (1 + alpha)
    rng = np.random.default_rng(seed)

    def keep(z):
        return (H.hnorm(z) < r / 2) & (dist_to_vertical(z, Vq) < eta)

    z = _sample_block(lambda m: near_axis(rng, Vq, m, r / 2, eta), keep, samples)
    y = H.mul(q, z)
    in_big = H.dist(y, p) < 2 * r
    in_Q = in_paraboloid(y, Paraboloid(p, Vp, lam, alpha))
    bad = ~in_big | in_Q
    rep.violations = int(bad.sum())
    rep.add("sampled", int(len(y)))
    rep.add("outside_B(p,2r)", int((~in_big).sum()))
    rep.add("inside_paraboloid", int(in_Q.sum()))
    return rep


# ---------------------------------------------------------------------------
# Hoelder tangents


def _greedy_cover(points: np.ndarray, radius: float, H: Heisenberg) -> int:
    """Number of gauge balls of the given radius, centered at sample points,
    picked greedily until every sample is covered."""
    left = points
    count = 0
    while len(left):
        c = left[0]
        left = left[H.dist(left, c) >= radius]
        count += 1
    return count


def _uniform_points(E, rng, size):
    mem = E.members
    w = np.array([m.box_mass for m in mem])
    which = rng.choice(len(mem), size=size, p=w / w.sum())
    pts = np.empty((size, 2 * E.n + 1))
    cvals = np.empty((size, mem[0].V.dim - 1))
    for i, m in enumerate(mem):
        sel = which == i
        u = rng.random((int(sel.sum()), m.V.dim))
        prm = m.box[:, 0] + u * (m.box[:, 1] - m.box[:, 0])
        pts[sel] = m.points(prm)
        cvals[sel] = prm[:, :-1]
    return pts, which, cvals


def verify_holder_tangents(cfg: dict) -> VerificationReport:
    """rho(V_x, V_y) <= C d(x,y)^alpha on sampled pairs whose density hypotheses hold."""
    prm = cfg["params"]
    seed = seed_override(cfg["seed"])
    E = build_set(prm["set"])
    n, km = E.n, E.metric_dim
    H = Heisenberg(n)
    alpha, lam, delta = float(prm["alpha"]), float(prm["lambda"]), float(prm["delta"])
    eps = float(prm.get("epsilon", delta / 4))
    pairs = int(prm.get("pairs", 1000))
    r_max = float(prm.get("r_max", 0.3))
    ns = int(prm.get("mc_samples", 4000))
    ncov = int(prm.get("cover_samples", 2000))
    rng = np.random.default_rng(seed)
    rep = VerificationReport("holder_tangents")
    rep.params = {"n": n, "k_m": km, "alpha": alpha, "lambda": lam, "delta": delta, "epsilon": eps,
                  "pairs": pairs, "r_max": r_max, "mc_samples": ns, "seed": seed}
    if eps > delta / 4:
        rep.hypotheses_met = False
        rep.criteria_met = False
        rep.notes.append("epsilon > delta/4: hypotheses unmet")
        return rep

    # upper density constant M over sampled centers and dyadic radii up to 2 r_max
    centers, _, _ = _uniform_points(E, rng, int(prm.get("density_points", 8)))
    M = upper_density_constant(E, centers, dyadic_radii(2 * r_max, count=6), ns, seed + 1)
    rep.params["M"] = M

    pool, pool_member, pool_c = _uniform_points(E, rng, 20 * pairs)
    tangents = {}

    def tangent(i):
        if i not in tangents:
            tangents[i] = E.members[pool_member[i]].tangent_at(pool_c[i])
        return tangents[i]

    checked = skipped = 0
    worst_ratio, worst_raw, C1_max, C_min = 0.0, 0.0, 0.0, np.inf
    attempts = 0
    while checked < pairs and attempts < 20 * pairs:
        attempts += 1
        i = int(rng.integers(len(pool)))
        d = H.dist(pool, pool[i])
        near = np.flatnonzero((d > 1e-3) & (d <= r_max))
        if near.size == 0:
            continue
        j = int(near[rng.integers(near.size)])
        x, y = pool[i], pool[j]
        r = float(d[j])
        s = seed + 10 * attempts
        hyp = True
        for k_, z in enumerate((x, y)):
            Vz = tangent(i if k_ == 0 else j)
            low = ball_measure(E, z, r, ns, s + k_)
            cyl = cylinder_excess(E, z, Vz, lam * r ** (1 + alpha), 2 * r, ns, s + 2 + k_, scale=r)
            if low.estimate < delta * r ** km or cyl.estimate > eps:
                hyp = False
                break
        if not hyp:
            skipped += 1
            continue
        checked += 1
        Vx, Vy = tangent(i), tangent(j)
        theta = rho(Vx, Vy, HARNESS_OPTS) if not same_subgroup(Vx, Vy, 1e-12) else 0.0
        if theta < 1e-9:
            continue
        ax = tube_axis(Vx, Vy, HARNESS_OPTS, theta=theta)
        eta = min(4 * n * lam * r ** (1 + alpha) / (ax.ell * theta), r)
        # covering of E & B(x,r) & C(Z, eta) by gauge balls of radius eta
        cand, _, _ = _uniform_points(E, rng, 8 * ncov)
        loc = H.mul(H.inv(x), cand)
        sel = (H.hnorm(loc) < r) & (dist_to_vertical(loc, ax.Z) < eta)
        h = _greedy_cover(cand[sel][:ncov], eta, H) if sel.any() else 1
        C1 = h * (eta / r) ** (km - 1)
        C = (4 * n / (delta * ax.ell)) * max(C1 * M * lam, lam)
        ratio = theta / (C * r ** alpha)
        worst_raw = max(worst_raw, theta / r ** alpha)
        worst_ratio = max(worst_ratio, ratio)
        C1_max = max(C1_max, C1)
        C_min = min(C_min, C)
        if ratio > 1:
            rep.violations += 1
    rep.add("pairs_checked", checked)
    rep.add("pairs_skipped_hypotheses", skipped)
    rep.add("max_ratio_rho_over_C_r_alpha", worst_ratio)
    rep.add("rho_over_r_alpha_max", worst_raw)
    rep.add("C1_max", C1_max)
    rep.add("C_min", C_min if np.isfinite(C_min) else 0.0)
    if checked < pairs:
        rep.criteria_met = False
        rep.notes.append(f"only {checked} of {pairs} pairs met the hypotheses")
    return rep


# ---------------------------------------------------------------------------


def verify_tangent_decay(cfg: dict) -> VerificationReport:
    """tangent_scan at each base point: ground truth recovered, slope >= 0.8 alpha."""
    prm = cfg["params"]
    seed = seed_override(cfg["seed"])
    E = build_set(prm["set"])
    n = E.n
    alpha, lam = float(prm["alpha"]), float(prm["lambda"])
    radii = dyadic_radii(float(prm["r_max"]), count=int(prm.get("levels", 11)))
    ns = int(prm.get("samples", 100_000))
    rep = VerificationReport("tangent_decay")
    rep.params = {"n": n, "alpha": alpha, "lambda": lam, "radii": radii, "samples": ns,
                  "seed": seed, "slope_threshold": 0.8 * alpha}
    lams = [lam] + ([lam / 4] if alpha == 1 and prm.get("quarter_lambda", True) else [])
    ok = True
    for ip, pt in enumerate(prm["points"]):
        truth = _vertical(pt["truth"])
        if "candidates" in prm:
            cands = [_vertical(c) for c in prm["candidates"]]
        else:
            cands = [truth] + [rotated_vertical(n, a) for a in prm.get("candidate_angles", [0.2, 0.5])]
        for l in lams:
            ts = tangent_scan(E, pt["p"], cands, l, alpha, radii, ns, seed + 1000 * ip)
            recovered = same_subgroup(ts.best, truth)
            good = recovered and not ts.tie and ts.decay_slope >= 0.8 * alpha
            ok &= good
            rep.add(f"point{ip}_lambda{l:g}", ts.excess, ts.ci, slope=ts.decay_slope,
                    best_index=ts.best_index, recovered=recovered, tie=ts.tie)
    rep.criteria_met = bool(ok)
    return rep


def verify_kernel_inclusion(cfg: dict) -> VerificationReport:
    """Q_alpha(p,T,lam) inside every Q_alpha(p,N(nu_j),lam); reverse=True checks
    the (false) converse as a negative control."""
    prm = cfg["params"]
    seed = seed_override(cfg["seed"])
    T = _vertical(prm["T"])
    n = T.n
    H = Heisenberg(n)
    alpha, lam = float(prm["alpha"]), float(prm["lambda"])
    p = H.point(prm.get("p", H.identity))
    samples = int(prm.get("samples", 1_000_000))
    reverse = bool(prm.get("reverse", False))
    S = horizontal_complement(T)
    Ns = kernel_hyperplanes(T, S)
    rng = np.random.default_rng(seed)
    # points near the paraboloid boundaries at unit scale
    r = rng.random(samples) ** 0.5
    base = near_axis(rng, T, samples, 1.0, 1.0)
    base[:, :-1] *= r[:, None]
    base[:, -1] *= r * r
    y = H.mul(p, base)
    inT = in_paraboloid(y, Paraboloid(p, T, lam, alpha))
    bad = np.zeros(samples, dtype=bool)
    for N in Ns:
        inN = in_paraboloid(y, Paraboloid(p, N, lam, alpha))
        bad |= (inN & ~inT) if reverse else (inT & ~inN)
    rep = VerificationReport("kernel_inclusion")
    rep.params = {"n": n, "k": T.dim, "alpha": alpha, "lambda": lam, "samples": samples, "seed": seed,
                  "reverse": reverse, "nu": S.basis}
    rep.violations = int(bad.sum())
    rep.add("fraction_in_Q_T", float(inT.mean()))
    return rep


VERIFIERS = {
    "cylinder_paraboloid": verify_cylinder_paraboloid,
    "tube": verify_tube,
    "separation": verify_separation,
    "holder_tangents": verify_holder_tangents,
    "tangent_decay": verify_tangent_decay,
    "kernel_inclusion": verify_kernel_inclusion,
}


def verify(cfg: dict) -> VerificationReport:
    """Validate, dispatch, and time one config."""
    validate_config(cfg)
    t0 = time.perf_counter()
    rep = VERIFIERS[cfg["lemma"]](cfg)
    rep.runtime_ms = int(round(1000 * (time.perf_counter() - t0)))
    rep.params.setdefault("config", cfg.get("name", ""))
    rep.params.setdefault("seed", seed_override(cfg["seed"]))
    return rep
