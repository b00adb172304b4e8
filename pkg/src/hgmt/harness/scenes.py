"""Scene configs: JSON schema, loading, and builders for model sets."""

from __future__ import annotations

import json
import os
from pathlib import Path

import jsonschema
import numpy as np

from ..hgroup import Heisenberg
from ..measure import FiniteUnion, MeasuredSet, Patch, PowerProfile, measured_set_from_json
from ..subgroups import SubgroupError, VerticalSubgroup, _perp_basis, subgroup_from_json

LEMMAS = ("cylinder_paraboloid", "tube", "separation", "holder_tangents", "tangent_decay",
          "kernel_inclusion")

_vec = {"type": "array", "items": {"type": "number"}}
_mat = {"type": "array", "items": _vec}
_subgroup = {
    "type": "object",
    "required": ["kind", "n", "basis"],
    "properties": {"kind": {"enum": ["vertical", "horizontal"]}, "n": {"type": "integer", "minimum": 1},
                   "basis": _mat},
}
_set = {"type": "object", "anyOf": [{"required": ["type"]}, {"required": ["preset"]}]}
_pos = {"type": "number", "exclusiveMinimum": 0}
_alpha = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
_count = {"type": "integer", "minimum": 100}

_PARAMS = {
    "cylinder_paraboloid": {
        "required": ["V", "alpha", "lambda", "r_max"],
        "properties": {"V": _subgroup, "alpha": _alpha, "lambda": _pos, "lambda_prime": _pos,
                       "r_max": _pos, "levels": {"type": "integer", "minimum": 1},
                       "annulus_samples": _count, "set": _set, "x": _vec, "mc_samples": _count},
    },
    "tube": {
        "required": ["S", "T", "eta"],
        "properties": {"S": _subgroup, "T": _subgroup, "eta": _pos, "radius": _pos,
                       "samples": _count, "target_scale": _pos},
    },
    "separation": {
        "required": ["alpha", "lambda", "V_p", "V_q", "p", "q"],
        "properties": {"alpha": _alpha, "lambda": _pos, "V_p": _subgroup, "V_q": _subgroup,
                       "p": _vec, "q": _vec, "C": _pos, "c": _pos, "lambda_prime": _pos,
                       "samples": _count, "sandwich_samples": _count},
    },
    "holder_tangents": {
        "required": ["set", "alpha", "lambda", "delta"],
        "properties": {"set": _set, "alpha": _alpha, "lambda": _pos, "delta": _pos,
                       "epsilon": _pos, "pairs": {"type": "integer", "minimum": 1}, "r_max": _pos,
                       "mc_samples": _count, "cover_samples": _count,
                       "density_points": {"type": "integer", "minimum": 1}},
    },
    "tangent_decay": {
        "required": ["set", "alpha", "lambda", "points", "r_max"],
        "properties": {"set": _set, "alpha": _alpha, "lambda": _pos, "r_max": _pos,
                       "levels": {"type": "integer", "minimum": 2}, "samples": _count,
                       "points": {"type": "array", "minItems": 1, "items": {
                           "type": "object", "required": ["p", "truth"],
                           "properties": {"p": _vec, "truth": _subgroup}}},
                       "candidates": {"type": "array", "minItems": 1, "items": _subgroup},
                       "candidate_angles": _vec, "quarter_lambda": {"type": "boolean"}},
    },
    "kernel_inclusion": {
        "required": ["T", "alpha", "lambda"],
        "properties": {"T": _subgroup, "alpha": _alpha, "lambda": _pos, "p": _vec,
                       "samples": _count, "reverse": {"type": "boolean"}},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["lemma", "seed", "params"],
    "properties": {
        "name": {"type": "string"},
        "lemma": {"enum": list(LEMMAS)},
        "seed": {"type": "integer", "minimum": 0},
        "expect": {"enum": ["pass", "fail"]},
        "description": {"type": "string"},
        "params": {"type": "object"},
    },
    "allOf": [
        {"if": {"properties": {"lemma": {"const": k}}},
         "then": {"properties": {"params": dict(type="object", **v)}}}
        for k, v in _PARAMS.items()
    ],
}


class ConfigError(ValueError):
    """Schema or reference error in a scene config (CLI exit code 2)."""


def seed_override(cfg_seed: int) -> int:
    env = os.environ.get("HGMT_SEED")
    if env is None or env.strip() == "":
        return int(cfg_seed)
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"HGMT_SEED must be an integer, got {env!r}") from exc


def validate_config(cfg: dict) -> dict:
    """Schema check plus construction of every referenced object."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema error at {list(exc.absolute_path)}: {exc.message}") from exc
    p = cfg["params"]
    try:
        for key in ("V", "S", "T", "V_p", "V_q"):
            if key in p:
                subgroup_from_json(p[key])
        for c in p.get("candidates", []):
            subgroup_from_json(c)
        for pt in p.get("points", []):
            subgroup_from_json(pt["truth"])
        if "set" in p:
            build_set(p["set"])
    except (SubgroupError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid reference: {exc}") from exc
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    cfg.setdefault("name", Path(path).stem)
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# set presets


def rotated_vertical(n: int, angle: float, plane=(0, None)) -> VerticalSubgroup:
    """Codimension-one vertical whose normal is e_i rotated by ``angle`` toward e_j.

    Default plane: (x_1, y_1) in H^1, (x_1, x_2) otherwise.
    """
    i, j = plane
    if j is None:
        j = n if n == 1 else 1
    nu = np.zeros(2 * n)
    nu[i], nu[j] = np.cos(angle), np.sin(angle)
    return VerticalSubgroup(n, _perp_basis(nu[None], n))


def shell_satellites(V: VerticalSubgroup, p, alpha: float, r_max: float, levels: int,
                     height: float = 0.2, tangent: float = 0.6, normal: float = 0.6,
                     width: float = 0.1) -> list[Patch]:
    """One small patch parallel to V in each dyadic shell around p.

    Satellite j sits at first-layer offset tangent*r_j along W plus normal*r_j
    along the unit normal, r_j = r_max 2^{-j}.  Its box has side width*r_j/sqrt(k-1)
    and half-height height*r_j^2*(r_j/r_max)^alpha, so its mass is a fixed multiple
    of r_j^{k_m+alpha}: the part of the set far from V near p has relative
    measure ~ r^alpha.
    """
    n, d = V.n, V.wbasis.shape[0]
    H = Heisenberg(n)
    p = H.point(p)
    N = _perp_basis(V.wbasis, n)
    half = width / np.sqrt(max(d, 1)) / 2
    out = []
    for j in range(levels):
        r = r_max * 2.0 ** (-j)
        off = tangent * r * V.wbasis[0] + normal * r * N[0]
        anchor = H.mul(p, np.concatenate([off, [0.0]]))
        tau = height * r * r * (r / r_max) ** alpha
        box = [[-half * r, half * r]] * d + [[-tau, tau]]
        out.append(Patch(V, anchor, box))
    return out


def build_set(doc) -> MeasuredSet:
    """A MeasuredSet from its JSON form or from a preset description.

    Presets:
      * ``shell_decay``: graph patch of V with a power profile plus dyadic
        shell satellites around the patch anchor.
      * ``two_patches``: two GraphPatches whose bases differ by a rotation.
    """
    if "type" in doc:
        return measured_set_from_json(doc)
    preset = doc["preset"]
    if preset == "shell_decay":
        V = subgroup_from_json(doc["V"])
        n = V.n
        H = Heisenberg(n)
        p = H.point(doc.get("anchor", [0.0] * (2 * n + 1)))
        half = float(doc.get("half_width", 1.0))
        box = [[-half, half]] * V.wbasis.shape[0] + [[-half, half]]
        alpha = float(doc["alpha"])
        main = Patch(V, p, box, PowerProfile(float(doc.get("coef", 0.0)), alpha))
        sats = shell_satellites(V, p, alpha, float(doc["r_max"]), int(doc.get("levels", 14)),
                                float(doc.get("height", 0.2)))
        return FiniteUnion(tuple([main] + sats))
    if preset == "two_patches":
        n = int(doc.get("n", 1))
        alpha = float(doc["alpha"])
        coef = float(doc.get("coef", 0.0))
        half = float(doc.get("half_width", 1.0))
        angle = float(doc["angle"])
        V1 = rotated_vertical(n, 0.0)
        V2 = rotated_vertical(n, angle)
        H = Heisenberg(n)
        shift = np.zeros(2 * n + 1)
        shift[:-1] = float(doc.get("offset", 0.0)) * (np.eye(2 * n) - V2.projector)[0]
        box = [[-half, half]] * (2 * n - 1) + [[-half, half]]
        center = tuple(doc.get("profile_center", [0.3] * (2 * n - 1)))
        a = Patch(V1, H.identity, box, PowerProfile(coef, alpha, 0, center))
        b = Patch(V2, shift, box, PowerProfile(coef, alpha, 0, center))
        return FiniteUnion((a, b))
    raise ConfigError(f"unknown set preset {preset!r}")
