"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses: 1 usage error, 2 data error, 3 internal error.
"""


class CrimePredError(Exception):
    """Base class for all crimepred errors."""

    exit_code = 3


class ParameterError(CrimePredError, ValueError):
    """An argument value is outside its documented domain."""

    exit_code = 1


class ConfigurationError(CrimePredError):
    """Inconsistent or incomplete configuration (schema/centers mismatch etc.)."""

    exit_code = 1


class StateError(CrimePredError):
    """Operation requires fitted state that is absent (vocabulary, centers)."""

    exit_code = 1


class UnsupportedModelError(CrimePredError):
    """Model kind is registered for interface completeness only."""

    exit_code = 1


class SchemaError(CrimePredError):
    """Input does not match the expected schema (columns, fingerprints, versions)."""

    exit_code = 2


class DataError(CrimePredError):
    """Input content is unusable (unreadable file, malformed payload)."""

    exit_code = 2


class UnknownLabelError(DataError):
    """A class-label name is not in the canonical label table."""

    def __init__(self, text):
        super().__init__(f"unknown class label: {text!r}")
        self.text = text


class LabelError(DataError):
    """A label index is outside [0, class_count)."""


class InsufficientDataError(DataError):
    """Too few records/points for the requested operation."""


class DegenerateRowError(DataError):
    """A probability row has zero sum and cannot be renormalized."""

    def __init__(self, row_index):
        super().__init__(f"probability row {row_index} sums to zero")
        self.row_index = row_index


class DivergenceError(CrimePredError):
    """Training produced a non-finite loss."""

    exit_code = 2
