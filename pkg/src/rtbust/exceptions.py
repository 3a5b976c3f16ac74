class RtbustError(Exception):
    """Base class for every error raised by the detection pipeline."""


class ConfigurationError(RtbustError, ValueError):
    """Invalid parameters, bands or missing configuration."""


class InputNotFoundError(RtbustError, FileNotFoundError):
    """A required input path does not exist."""


class MalformedRecordError(RtbustError):
    """An event record could not be parsed."""


class CausalityError(MalformedRecordError):
    """A retweet is timestamped before the tweet it retweets."""


class MalformedSequenceError(RtbustError):
    """A run-length encoded sequence violates its grammar."""


class WindowError(RtbustError):
    """An event lies outside the analysis window."""


class UndefinedInputError(RtbustError, ValueError):
    """The input is outside the domain of the requested statistic."""


class NumericalFailureError(RtbustError):
    """A numerical routine produced non-finite values."""


class TrainingDivergedError(NumericalFailureError):
    """Training loss exploded or became NaN."""

    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = list(trace or [])


class IncompatibleArtifactError(RtbustError):
    """A persisted artifact has the wrong magic, version or layout."""


class StageFailedError(RtbustError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
