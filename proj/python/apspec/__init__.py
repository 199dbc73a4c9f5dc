"""Almost-periodic spectral laboratory.

Thin wrappers over the compiled core; JSON reports come back as Python dicts.
"""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    Error,
    InvalidArgument,
    NonConvergence,
    ResolutionError,
    conjugate_exact,
    conjugate_truncated,
    diophantine_constant,
    experiment_kinds,
    limit_periodic_set,
    min_gap,
    projector_kernel,
    prufer_endpoint_angles,
    quasi_periodic_set,
    s_weight,
    weight_exponent,
)

__version__ = _core.__version__


def experiment_schema(kind):
    return _json.loads(_core.experiment_schema_json(kind))


def validate_config(config):
    """Config with every default filled in; raises ConfigError naming the field."""
    return _json.loads(_core.validate_config_json(_json.dumps(config)))


def run_experiment(config, out):
    """Runs one experiment, writing report.json, artifacts and manifest.json under out."""
    return _json.loads(_core.run_experiment_json(_json.dumps(config), str(out)))


def shoot_rotation(a, b, ks, theta_start, theta_target):
    return _json.loads(_core.shoot_rotation(a, b, ks, theta_start, theta_target))


def build_embedded(kappas, m_max=1):
    """(plan, eigenfunctions): the plan as a dict, eigenfunctions as dicts of samples."""
    plan, eigenfunctions = _core.build_embedded(list(kappas), m_max)
    return _json.loads(plan), eigenfunctions
