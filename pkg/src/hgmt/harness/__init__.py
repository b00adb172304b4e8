"""Scene configs, lemma verifications and the ``hgmt`` command line."""

from .cli import main, run_all
from .scenes import ConfigError, build_set, load_config, validate_config
from .verify import (
    VERIFIERS,
    verify,
    verify_cylinder_paraboloid,
    verify_holder_tangents,
    verify_kernel_inclusion,
    verify_separation,
    verify_tangent_decay,
    verify_tube,
)
