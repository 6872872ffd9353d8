"""Exception types shared across the package."""


class WindcastError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(WindcastError, ValueError):
    """Operands have incompatible dimensions."""


class ConfigError(WindcastError, ValueError):
    """A configuration value is outside its legal range."""


class ContractError(WindcastError, ValueError):
    """An operation was called in a way its contract forbids."""


class IngestError(WindcastError, ValueError):
    """Input data could not be parsed or violates the record schema."""


class DecompositionError(WindcastError, ValueError):
    """A series is too short (or otherwise unfit) for the requested decomposition."""


class TrainingDiverged(WindcastError, RuntimeError):
    """Training produced a non-finite loss."""
