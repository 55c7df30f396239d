"""Exception hierarchy for the brwlab package.

Every operational failure mode has its own class so callers (and the CLI
verdict machinery) can tell a numerical failure from a contract violation.
"""


class BrwLabError(Exception):
    """Base class for all package errors."""


class LawValidationError(BrwLabError):
    """A reproduction law failed structural validation at construction."""


class TiltDomainError(BrwLabError):
    """A tilt parameter lies outside the law's finiteness interval."""


class DegenerateLawError(BrwLabError):
    """The tilted displacement variance vanishes (kappa'' <= 0)."""


class SolverError(BrwLabError):
    """A root finder did not converge; carries the last bracket."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class RootAbsentError(SolverError):
    """The target equation has no root on the scanned interval."""


class UnsupportedConfigurationError(BrwLabError):
    """A regime classification needs a critical tilt that does not exist."""


class BudgetExceededError(BrwLabError):
    """A simulation exceeded its particle-count budget under pruning None."""


class PrunedSnapshotError(BrwLabError):
    """A martingale was requested on a pruned snapshot (would be biased)."""


class MissingAnnotationsError(BrwLabError):
    """A truncated functional needs trajectory annotations that are absent."""


class TruncationParameterError(BrwLabError):
    """Truncation constants violate a + theta*L + theta*kappa' - kappa < 0."""


class CoverageError(BrwLabError):
    """A test function sees below the recorded depth window of a sample."""


class InsufficientTailError(BrwLabError):
    """Too few samples above the tail-regression window's lower edge."""


class FitAmbiguityError(BrwLabError):
    """The KS profile of the shift-constant fit is not unimodal."""


class PartialResultError(BrwLabError):
    """A sampler ran out of budget; carries whatever was collected."""

    def __init__(self, message, accepted=None, acceptance_rate=None):
        super().__init__(message)
        self.accepted = accepted
        self.acceptance_rate = acceptance_rate


class InfeasibleRunError(BrwLabError):
    """A requested run is projected to violate its own resource bounds."""


class ConfigError(BrwLabError):
    """An experiment config failed schema validation; names the field path."""
