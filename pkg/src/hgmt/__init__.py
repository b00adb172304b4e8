"""Numerical toolkit for the Heisenberg group: metric, subgroups, Grassmannian,
paraboloids, Monte Carlo measure estimates and lemma verifications."""

from .hgroup import DimensionError, Heisenberg, omega
from .optimize import OptimizerOptions
from .subgroups import (
    Decomposition,
    HLinearMap,
    HorizontalSubgroup,
    SubgroupError,
    VerticalSubgroup,
    dist_to_horizontal,
    dist_to_vertical,
    hlinear_injectivity_constant,
    hlinear_kernel,
    horizontal_complement,
    kernel_hyperplanes,
    sandwich_constant,
    split,
)
from .grassmannian import canonical_perp, metric_dimension, rho
from .report import VerificationReport

__version__ = "0.1.0"
