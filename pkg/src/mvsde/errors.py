"""Exception hierarchy shared by all mvsde modules."""


class MVSDEError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MVSDEError, ValueError):
    """An argument lies outside the mathematical domain (non-finite, t < 0, empty measure)."""


class ShapeError(MVSDEError, ValueError):
    """An array argument has the wrong dimensions."""


class ConfigError(MVSDEError, ValueError):
    """A configuration value is missing, unknown, or of the wrong type."""


class ConstructionError(MVSDEError, ValueError):
    """A coefficient set or mollified set cannot be built as requested."""


class SimulationError(MVSDEError, RuntimeError):
    """The integrator produced an invalid state."""


class StoreError(MVSDEError, RuntimeError):
    """Trajectory store I/O failed."""


class StoreIntegrityError(StoreError):
    """A stored block does not match its manifest hash or size."""


class StoreVersionError(StoreError):
    """The stored manifest uses an unsupported format version."""
