"""Exception types shared across the package."""


class FockphaseError(Exception):
    """Base class for all package errors."""


class ValidationError(FockphaseError, ValueError):
    """Input outside its documented domain (bad cutoff, regime, channel, ...)."""


class UnsupportedBranchError(FockphaseError):
    """No closed form exists for the requested parameter branch.

    The exact Born-rule evaluator (``measurement.generic_probs``) covers
    every branch and should be used instead.
    """


class SingularOutcomeError(FockphaseError):
    """An outcome probability vanished while its phase derivative did not."""


class DegenerateEvidenceError(FockphaseError):
    """Bayesian evidence underflowed: the observed outcome is impossible
    under the current prior support."""


class NumericalError(FockphaseError):
    """A numerical routine left its validity envelope (non-PSD matrix, ...)."""
