"""Derivative-free multi-start minimization used by the distance and rho routines."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True)
class OptimizerOptions:
    """Public defaults; echoed into every report that uses them."""

    starts: int = 8
    tol: float = 1e-8
    maxiter: int = 1000
    seed: int = 0
    grid_n1: int = 64
    grid_n2: int = 16
    polish_side: int = 3
    polish_cap: int = 2

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    converged: bool
    nfev: int


class OptimizerWarning(RuntimeWarning):
    pass


def multistart_minimize(fun, starts, opts: OptimizerOptions) -> OptimizeResult:
    """Run Nelder-Mead from each start and keep the best point.

    Non-convergence is reported through ``converged`` (and a warning) rather than
    raised, so callers always get the best value found.
    """
    best = None
    converged = True
    nfev = 0
    for x0 in starts:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        res = minimize(
            fun,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": opts.tol * 1e-2,
                "fatol": opts.tol * 1e-2,
                "maxiter": opts.maxiter,
                "initial_simplex": _initial_simplex(x0),
            },
        )
        nfev += res.nfev
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success)
    if not converged:
        warnings.warn(f"optimizer did not converge; best value {best.fun:.3e}", OptimizerWarning)
    return OptimizeResult(x=np.asarray(best.x), fun=float(best.fun), converged=converged, nfev=nfev)


def _initial_simplex(x0: np.ndarray) -> np.ndarray:
    step = max(0.05, 0.1 * float(np.max(np.abs(x0), initial=0.0)))
    simplex = np.tile(x0, (x0.size + 1, 1))
    for i in range(x0.size):
        simplex[i + 1, i] += step
    return simplex
