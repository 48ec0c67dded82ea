"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent model configuration (grid/covariate misalignment, bad options)."""


class DataFormatError(ValueError):
    """Malformed input file (bad header, bad row, missing/duplicate boxes)."""
