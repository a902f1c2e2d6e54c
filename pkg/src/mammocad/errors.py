"""Exception types raised across the package.

Everything derives from ValueError so callers that do not care about the
fine-grained class can catch the usual built-in.
"""


class PgmError(ValueError):
    """Base class for PGM parsing failures."""


class MalformedHeader(PgmError):
    """Magic number, dimensions or maxval token is missing or invalid."""


class TruncatedData(PgmError):
    """Fewer raster samples than width*height."""


class UnsupportedMaxval(PgmError):
    """Maxval above 255. Only 8-bit rasters are supported."""


class NonPositiveSigma(ValueError):
    """Gaussian standard deviation must be > 0."""


class DimensionMismatch(ValueError):
    """Operands disagree on vector or raster dimensions."""


class DegenerateHistogram(ValueError):
    """All pixels share one intensity; no threshold can split them."""


class EmptyDataset(ValueError):
    """An operation that needs samples received none."""


class SingleClass(ValueError):
    """Training data contains only one label."""


class TooLarge(ValueError):
    """Problem size exceeds the limit of an exhaustive-search oracle."""


class UnsupportedVersion(ValueError):
    """Model file written by a newer format revision."""


class SchemaViolation(ValueError):
    """Model file is truncated or structurally invalid."""


class InfoFormatError(ValueError):
    """Base class for ground-truth info file parsing failures."""


class BadTokenCount(InfoFormatError):
    """Line has a token count that matches no known record layout."""


class UnknownCode(InfoFormatError):
    """Tissue, abnormality or severity code outside the published sets."""


class NonNumericCoordinate(InfoFormatError):
    """Center coordinate or radius token is not a number."""


class MissingCoordinates(ValueError):
    """Record carries no lesion center."""
