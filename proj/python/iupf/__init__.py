"""Python bindings for the unified potential field planner."""

from ._iupf import (
    DynamicsModel,
    Error,
    InvalidParameter,
    RunLog,
    SafetyReport,
    Scenario,
    ValidationError,
    build_system_matrices,
    initial_fields,
    load_scenario,
    min_separation,
    propagate,
    run,
    screened_poisson,
    wasserstein2,
)

__all__ = [
    "DynamicsModel",
    "Error",
    "InvalidParameter",
    "RunLog",
    "SafetyReport",
    "Scenario",
    "ValidationError",
    "build_system_matrices",
    "initial_fields",
    "load_scenario",
    "min_separation",
    "propagate",
    "run",
    "screened_poisson",
    "wasserstein2",
]
