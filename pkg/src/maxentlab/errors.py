"""Semantic exception hierarchy shared across the package."""


class MaxentError(Exception):
    """Base class for all errors raised by this package."""


class InputError(MaxentError):
    """Malformed user-supplied data (bad file, bad schema, bad value)."""


class AlphabetMismatch(MaxentError):
    """Two objects were combined that live on different outcome alphabets."""


class ShapeMismatch(MaxentError):
    """Array dimensions do not line up (features vs. targets vs. alphabet)."""


class DomainError(MaxentError):
    """An operation was evaluated outside its mathematical domain."""


class SupportViolation(MaxentError):
    """A distribution puts mass where the reference distribution has none."""


class ConstraintViolation(MaxentError):
    """A distribution required to satisfy the moment constraints does not."""


class FamilyMismatch(MaxentError):
    """Two exponential-family models do not share prior and features."""


class EnumerationCapExceeded(MaxentError):
    """The histogram enumeration would exceed the configured cap."""


class EmptyEvent(MaxentError):
    """No histogram at this sample size satisfies the constraints."""


class EnergyMatchingError(MaxentError):
    """No scaling of the variational parameters matches the energies."""


class ConvergenceError(MaxentError):
    """An iterative solver exhausted its budget without converging."""
