"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it:
2 for malformed input files, 3 for values that parse but violate a
model invariant.
"""


class FtCarbonError(Exception):
    exit_code = 3


class InputParseError(FtCarbonError):
    exit_code = 2


class ValidationError(FtCarbonError):
    exit_code = 3


# -- input files ------------------------------------------------------------

class FileUnreadable(InputParseError):
    pass


class SchemaViolation(InputParseError):
    pass


class BadHeader(InputParseError):
    pass


class MalformedRow(InputParseError):
    pass


class NonMonotoneTimestamps(InputParseError):
    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"non-monotone timestamp at row {row}")


class ValueOutOfRange(InputParseError):
    pass


# -- invariants -------------------------------------------------------------

class InvariantViolation(ValidationError):
    pass


class NotFound(ValidationError):
    def __init__(self, kind: str, name: str, suggestions=()):
        self.kind = kind
        self.name = name
        self.suggestions = tuple(suggestions)
        msg = f"unknown {kind} {name!r}"
        if self.suggestions:
            msg += "; did you mean " + ", ".join(repr(s) for s in self.suggestions) + "?"
        super().__init__(msg)


class UsageOutOfRange(ValidationError):
    pass


class NegativeRuntime(ValidationError):
    pass


class NonPositiveDistance(ValidationError):
    pass


class EmptyFacilityList(ValidationError):
    pass


class TraceTooShort(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptySequence(ValidationError):
    pass


class NonFiniteVector(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class MissingEmbeddings(ValidationError):
    pass


class LabelMismatch(ValidationError):
    def __init__(self, only_scores, only_footprints):
        self.only_scores = tuple(sorted(only_scores))
        self.only_footprints = tuple(sorted(only_footprints))
        parts = []
        if self.only_scores:
            parts.append("scores only: " + ", ".join(self.only_scores))
        if self.only_footprints:
            parts.append("footprints only: " + ", ".join(self.only_footprints))
        super().__init__("label mismatch (" + "; ".join(parts) + ")")
