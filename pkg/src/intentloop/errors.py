"""Exception types shared across the package."""


class IntentLoopError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteSample(IntentLoopError):
    """A raw EMG vector contained NaN or infinity."""


class ScheduleOverrun(IntentLoopError):
    """A cue schedule extends past the end of the recording."""


class ClassAbsent(IntentLoopError):
    """A training set is missing (or nearly missing) one of the intent classes."""


class SingularCovariance(IntentLoopError):
    """The shrunk pooled covariance is not positive definite."""


class NonMonotonicTime(IntentLoopError):
    """Samples arrived out of time order on the streaming path."""


class NoModel(IntentLoopError):
    """The engine was asked to infer without a loaded classifier."""


class SourceDropout(IntentLoopError):
    """A sample source failed mid-stream."""


class RecordingAborted(IntentLoopError):
    """A collection recording was interrupted and discarded."""


class RecordingParseError(IntentLoopError):
    """A recording file row could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ParseOrderError(RecordingParseError):
    """Recording file timestamps are not strictly increasing."""


class EmptyEvaluation(IntentLoopError):
    """An accuracy was requested over zero evaluated samples."""


class TooFewPoints(IntentLoopError):
    """Not enough points (or classes) for the requested analysis."""


class StageOrderError(IntentLoopError):
    """A session stage was invoked out of order."""


class StopRequested(IntentLoopError):
    """An operator stopped the running stage."""
