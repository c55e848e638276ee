"""Exception types shared across the pipeline."""


class VerbaplanError(Exception):
    """Base class for all package errors."""


class EmptyInput(VerbaplanError):
    """Command text contains no alphabetic content."""


class ParseFailure(VerbaplanError):
    """No complete parse; carries the longest recognized token prefix."""

    def __init__(self, message, prefix_tokens=None):
        super().__init__(message)
        self.prefix_tokens = list(prefix_tokens or [])


class NoMatch(VerbaplanError):
    """Object filter produced an empty candidate set."""


class DimensionMismatch(VerbaplanError):
    """Vector length does not match the expected dimension."""


class EmptyDomain(VerbaplanError):
    """No grounding candidate could be generated for a phrase node."""


class ModelMismatch(VerbaplanError):
    """Model feature schema does not match the current schema version."""


class Degenerate(VerbaplanError):
    """A factor template received no training samples."""


class InsufficientData(VerbaplanError):
    """Fewer samples than mixture components for some key."""


class UnknownRootGrounding(VerbaplanError):
    """No mixture entry for the requested root grounding key."""


class UnresolvedReference(VerbaplanError):
    """Pronoun used without a live session binding."""


class LengthMismatch(VerbaplanError):
    """Serialized parameter vector has the wrong length."""


class OutOfRange(VerbaplanError):
    """Query time outside the trajectory horizon."""


class PlanningFailure(VerbaplanError):
    """No collision-free trajectory found after weight escalation."""


class EmptyLog(VerbaplanError):
    """Metrics requested over an empty episode log."""


class IntegrityError(VerbaplanError):
    """Model file failed its checksum."""


class SchemaMismatch(VerbaplanError):
    """Model was trained against a different attribute schema."""
