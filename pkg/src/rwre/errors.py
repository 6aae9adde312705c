"""Exception hierarchy shared across the package."""


class RwreError(Exception):
    """Base class for all package errors."""


class ConfigError(RwreError):
    """Invalid experiment configuration."""


class WeightSumError(ConfigError):
    """Mixture weights do not sum to one."""


class SupportViolation(ConfigError):
    """An atom or uniform piece leaves the declared support interval."""


class DuplicateAtom(ConfigError):
    """Two atoms share the same value."""


class PreconditionViolation(RwreError):
    """A documented precondition of an operation does not hold."""


class UnsupportedCase(RwreError):
    """Requested reconstruction not implemented for this configuration."""


class EmptySample(RwreError):
    """An empirical measure was requested from zero observations."""


class TieAtBoundary(RwreError):
    """Known-count classification hit an exact tie at the cut."""


class InsufficientHits(RwreError):
    """No interval first-hits available for the crossing estimator."""


class NoCrossing(RwreError):
    """The second value never follows the first in the stream."""


class AllCorrupted(RwreError):
    """Every shortest-crossing string contains a corrupted value."""


class InsufficientAnchors(RwreError):
    """Fewer than two usable non-atomic anchor values in the stream."""


class NoDistinguishingSite(RwreError):
    """No reconstructed site breaks the left/right symmetry."""
