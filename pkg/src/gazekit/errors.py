"""Exception types raised across the package.

Every error derives from :class:`GazeKitError`; most also derive from
``ValueError`` because they signal bad input rather than a broken program.
The CLI maps these onto distinct exit codes.
"""


class GazeKitError(Exception):
    """Base class for all package errors."""


# ingest
class MissingColumn(GazeKitError, KeyError):
    pass


class NonMonotonicTime(GazeKitError, ValueError):
    pass


class EmptySource(GazeKitError, ValueError):
    pass


class EmptyRecording(GazeKitError, ValueError):
    pass


# events
class TooFewSamples(GazeKitError, ValueError):
    pass


class NonPositiveThreshold(GazeKitError, ValueError):
    pass


# features
class EmptyTrial(GazeKitError, ValueError):
    pass


class NoPupilData(GazeKitError, ValueError):
    pass


class NoMotionData(GazeKitError, ValueError):
    pass


class QueueNotFull(GazeKitError, RuntimeError):
    pass


class EmptySegment(GazeKitError, ValueError):
    pass


# datasets
class InsufficientSubjects(GazeKitError, ValueError):
    pass


class ClassMissing(GazeKitError, ValueError):
    pass


class TooFewRows(GazeKitError, ValueError):
    pass


class TimeOutOfRange(GazeKitError, ValueError):
    pass


class NoConfusionSamples(GazeKitError, ValueError):
    pass


# learn
class SingleClass(GazeKitError, ValueError):
    pass


class DegenerateData(GazeKitError, ValueError):
    pass


class SchemaMismatch(GazeKitError, ValueError):
    pass


class TooManyFolds(GazeKitError, ValueError):
    pass


class MissingSharedDim(GazeKitError, KeyError):
    pass


# online
class TimeRegression(GazeKitError, ValueError):
    pass


# cli
class ConfigError(GazeKitError):
    pass


class StageError(GazeKitError):
    """Wraps a module error raised while running a pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
