"""Exception hierarchy shared across the pipeline stages."""


class MeibokitError(Exception):
    """Base class for all errors raised by this package."""


class MaskError(MeibokitError):
    """Label mask or sidecar could not be loaded or validated."""


class GeometryError(MeibokitError):
    """A per-gland measurement is undefined for the given geometry."""


class TableError(MeibokitError):
    """Clinical table violates the column contract."""


class DuplicateIdError(TableError):
    """Two rows share a subject_eye_id."""

    def __init__(self, duplicates):
        self.duplicates = sorted(duplicates)
        super().__init__(f"duplicate subject_eye_id values: {', '.join(self.duplicates)}")


class TemplateError(MeibokitError):
    """Deterministic report rendering failed for a record."""


class SummaryParseError(MeibokitError):
    """Raw summarizer output contained no parseable Q&A pairs."""


class EndpointError(MeibokitError):
    """Chat-completion endpoint failed after retries."""

    def __init__(self, message, last_status=None, attempts=None):
        self.last_status = last_status
        self.attempts = attempts
        super().__init__(message)


class KnowledgeError(MeibokitError):
    """Trial criteria or clinician case input is invalid."""


class AssemblyError(MeibokitError):
    """Dataset assembly or splitting cannot proceed."""


class EvaluationError(MeibokitError):
    """Prediction scoring preconditions are violated."""


class ConfigError(MeibokitError):
    """Pipeline configuration is missing or inconsistent."""
