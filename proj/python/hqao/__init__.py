"""Python front end to the hqao C++ core.

Functions returning structured results decode the core's JSON into dicts.
"""

import json as _json

from ._core import (
    BracketError,
    ConfigError,
    DomainError,
    Error,
    HierarchyParams,
    ModelParams,
    RangeError,
    StabilityError,
    TruncationError,
    TuningError,
    block_members,
    config_keys,
    coupling_matrix,
    cumulants_from_moments,
    default_config,
    double_commutator_residual,
    gaussian_oracle_u_hat,
    ising_ring_root_ratio,
    kernels,
    moments_from_cumulants,
    u_hat0,
)
from . import _core

__all__ = [
    "BracketError", "ConfigError", "DomainError", "Error", "HierarchyParams", "ModelParams",
    "RangeError", "StabilityError", "TruncationError", "TuningError", "block_members",
    "config_keys", "coupling_matrix", "cumulants_from_moments", "default_config",
    "double_commutator_residual", "epsilon_window", "flow_run", "gaussian_oracle_u_hat",
    "ising_ring_root_ratio", "kernels", "moments_from_cumulants", "propagate", "run",
    "spectral_record", "u_hat0",
]


def spectral_record(model, q_modes=8):
    return _json.loads(_core.spectral_record(model, q_modes))


def epsilon_window(kappa=2, delta=0.25, epsilon=0.05):
    return _json.loads(_core.epsilon_window(kappa, delta, epsilon))


def propagate(u0, x0, kappa=2, delta=0.25, epsilon=0.05, n_max=400):
    return _json.loads(_core.propagate(u0, x0, kappa, delta, epsilon, n_max))


def flow_run(model, hier, n_max, population=100000, cutoff=32, seed=1):
    return _json.loads(_core.flow_run(model, hier, n_max, population, cutoff, seed))


def run(subcommand, config_yaml="", out=""):
    """Run a CLI subcommand in-process. Returns (exit_code, message, files)."""
    return _core.run(subcommand, config_yaml, out)
