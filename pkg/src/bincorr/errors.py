"""Exception types shared across the package.

The CLI maps these onto its exit-code taxonomy, so solver trouble and
invariant breaches must stay distinguishable from plain bad input.
"""


class BincorrError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(BincorrError, ValueError):
    """Operator or tensor dimensions are inconsistent."""


class InvalidScenario(BincorrError, ValueError):
    """An object does not fit the scenario an operation expects."""


class SignalingBehavior(BincorrError, ValueError):
    """A Bell behavior violates no-signaling beyond tolerance."""


class ScenarioTooLarge(BincorrError, ValueError):
    """Deterministic-strategy enumeration would exceed the configured cap."""


class SolverFailure(BincorrError, RuntimeError):
    """An LP/SDP solver did not return a trusted optimal solution."""


class InvariantViolation(BincorrError, RuntimeError):
    """A certified invariant (monotonicity, certificate check, ...) failed."""
