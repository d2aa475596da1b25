"""Exception types shared across the ripflow package."""


class RipflowError(Exception):
    """Base class for all ripflow errors."""


class ConfigError(RipflowError):
    """Bad or inconsistent configuration (CLI exit code 2)."""


class InputError(RipflowError):
    """Missing or undecodable input file (CLI exit code 3)."""


class DimensionError(InputError):
    """Grid dimensions do not match the expected width/height."""


class InsufficientDataError(InputError):
    """Fewer frames or samples than the operation requires."""


class UnsupportedInputError(InputError):
    """Input lacks a required channel or attribute (e.g. color planes)."""


class NoCoastlineError(InputError):
    """Shore mask is uniform, so no coastline can be extracted."""


class UndefinedGroundTruthError(InputError):
    """Ground-truth region is empty; precision/recall undefined."""


class NumericalError(RipflowError):
    """Numerical failure such as non-finite values (CLI exit code 4)."""
