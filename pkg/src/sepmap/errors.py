"""Exception types raised across the package.

Every error carries a short machine-readable ``code`` so the command line
front-end can report failures as JSON.
"""


class SepMapError(Exception):
    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


# dataset
class MissingFile(SepMapError, FileNotFoundError):
    code = "missing_file"


class SchemaViolation(SepMapError, ValueError):
    code = "schema_violation"


class NonMonotonicTimestamps(SepMapError, ValueError):
    code = "non_monotonic_timestamps"


class UnknownCategory(SepMapError, ValueError):
    code = "unknown_category"


class InsufficientCoverage(SepMapError, ValueError):
    code = "insufficient_coverage"


class EmptyResult(SepMapError, ValueError):
    code = "empty_result"


# features
class IndexOutOfRange(SepMapError, IndexError):
    code = "index_out_of_range"


class DegenerateInterval(SepMapError, ValueError):
    code = "degenerate_interval"


class NoValidIntervals(SepMapError, ValueError):
    code = "no_valid_intervals"


# forest
class EmptyNode(SepMapError, ValueError):
    code = "empty_node"


class SingleClassInput(SepMapError, ValueError):
    code = "single_class_input"


class EmptyMatrix(SepMapError, ValueError):
    code = "empty_matrix"


class DimensionMismatch(SepMapError, ValueError):
    code = "dimension_mismatch"


# explain
class InconsistentDimensions(SepMapError, ValueError):
    code = "inconsistent_dimensions"


class SingleClassResample(SepMapError, ValueError):
    code = "single_class_resample"


# metrics
class UndefinedScore(SepMapError, ZeroDivisionError):
    code = "undefined_score"


class LengthMismatch(SepMapError, ValueError):
    code = "length_mismatch"


class EmptyInput(SepMapError, ValueError):
    code = "empty_input"


# experiment harness
class NoValidCells(SepMapError, RuntimeError):
    code = "no_valid_cells"


class InvalidSpec(SepMapError, ValueError):
    code = "invalid_spec"


class IoFailure(SepMapError, OSError):
    code = "io_failure"
