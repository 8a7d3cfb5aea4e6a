"""Exception types shared across the package."""


class TandemError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(TandemError, ValueError):
    """Instance parameters violate a model constraint."""


class NonPositiveRate(ValidationError):
    """A rate or cost that must be positive (or nonnegative) is not."""


class CollaborationBoundViolated(ValidationError):
    """Collaboration increment outside (0, mu_i], or nu_i + xi_i <= mu_i."""


class OrphanCollaboration(ValidationError):
    """Collaboration increment given for a station with no dedicated server."""


class EmptySystem(TandemError):
    """No feasible action: both stations are empty."""


class DependencyMissing(TandemError):
    """A neighbor value required by the one-step cost is not available."""


class InfeasibleAction(TandemError):
    """A policy prescribes an allocation outside the feasible set."""


class DeadPolicy(TandemError):
    """A policy allocates zero total rate at a reachable nonempty state."""


class DomainTooSmall(TandemError):
    """The solved domain is too shallow for the requested analysis."""


class NotThresholdShaped(TandemError):
    """An assignment column is not single-crossing; carries a witness state."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class IdlingRegimeRequired(TandemError):
    """Idling-threshold extraction requires h1 < h2."""


class HypothesisNotMet(TandemError):
    """The instance does not satisfy the hypotheses of the requested check."""


class RegimeUnsatisfiable(TandemError):
    """Random instance generation exhausted its resample budget."""


class SearchSpaceTooLarge(TandemError):
    """Exhaustive policy enumeration would exceed the configured limit."""


class MaxIterationsExceeded(TandemError):
    """Value iteration did not converge within the iteration cap."""


class GoldenMismatch(TandemError):
    """A published counterexample instance did not reproduce."""
