"""Exception types shared across the package.

Exit-code mapping for the CLI: anything derived from ``InputError`` is a
problem with user-supplied data or parameters (exit 2); everything else is
an internal failure (exit 1).
"""


class CamScoreError(Exception):
    """Base class for all package errors."""


class InputError(CamScoreError):
    """Bad user input: parameters, files, or malformed data."""


class ParameterError(InputError, ValueError):
    """A parameter is out of its documented range (alpha <= 0, tau outside (0,1), ...)."""


class ValidationError(InputError, ValueError):
    """Structurally invalid data: shape mismatches, misaligned inputs, broken invariants."""


class TensorError(ValidationError):
    """Tensor construction rejected (non-finite values, wrong element count)."""


class MethodRequirementsError(InputError):
    """A CAM method was asked to run without the inputs it requires."""


class ManifestError(InputError):
    """A bundle manifest or one of its tensor files failed to load."""


class CsvParseError(InputError):
    """A CSV input failed to parse; the message carries the line number."""


class SeriesLookupError(InputError, LookupError):
    """A requested epoch or method is not present in a checkpoint series."""
