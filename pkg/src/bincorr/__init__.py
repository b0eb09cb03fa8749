"""bincorr: the cost of binarising multi-outcome quantum measurements.

Builds quantum behaviors and steering assemblages, maps them into their
binarised (click/no-click) scenarios, decides classicality there by linear
and semidefinite programming, and emits dual-witness certificates that can
be re-verified independently of the solver.
"""

__version__ = "0.1.0"

from . import classicality, constructions, qcore, scenarios
from .errors import (
    BincorrError,
    DimensionMismatch,
    InvalidScenario,
    InvariantViolation,
    ScenarioTooLarge,
    SignalingBehavior,
    SolverFailure,
)

__all__ = [
    "BincorrError",
    "DimensionMismatch",
    "InvalidScenario",
    "InvariantViolation",
    "ScenarioTooLarge",
    "SignalingBehavior",
    "SolverFailure",
    "classicality",
    "constructions",
    "qcore",
    "scenarios",
    "__version__",
]
