__version__ = "0.1.0"

from .exceptions import (
    CausalityError,
    ConfigurationError,
    IncompatibleArtifactError,
    InputNotFoundError,
    MalformedRecordError,
    MalformedSequenceError,
    NumericalFailureError,
    RtbustError,
    StageFailedError,
    TrainingDivergedError,
    UndefinedInputError,
    WindowError,
)

__all__ = (
    '__version__',
    'RtbustError',
    'ConfigurationError',
    'InputNotFoundError',
    'MalformedRecordError',
    'CausalityError',
    'MalformedSequenceError',
    'WindowError',
    'UndefinedInputError',
    'NumericalFailureError',
    'TrainingDivergedError',
    'IncompatibleArtifactError',
    'StageFailedError',
)
