"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
anything else -> 3.
"""


class AlbpError(Exception):
    pass


class UsageError(AlbpError):
    """Bad command line or config input."""


class DataError(AlbpError):
    """Problem with user-supplied data (images, datasets, CSVs, model files)."""


class ImageFormatError(DataError):
    """Unsupported or malformed raster file."""


class ModelIOError(DataError):
    """Corrupt or incompatible serialized model."""
