class AlignmentError(Exception):
    """Base class for every error raised by pose_align."""


class InvalidInputError(AlignmentError, ValueError):
    """Geometry input that is non-finite or not a unit quaternion."""


class ExecutorBusyError(AlignmentError, RuntimeError):
    """A pose step was submitted while another one is still executing."""


class ScenarioError(AlignmentError, ValueError):
    """A scenario file could not be read or failed validation."""


class ComparisonError(AlignmentError, ValueError):
    """Controller groups cannot be compared (e.g. fewer than two groups)."""


class ScenarioMismatchError(ComparisonError):
    """Trial groups that are compared were not run on the same scenario."""


class EmptyLogError(AlignmentError, ValueError):
    """Metrics, plots or logs were requested for an empty set of rows/records."""


class LogFormatError(AlignmentError, ValueError):
    """A file passed as a trial log does not have the trial log columns."""
