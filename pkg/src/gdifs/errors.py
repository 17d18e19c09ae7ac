"""Exception types raised across the package."""


class GDIFSError(ValueError):
    """Base class for all errors raised by :mod:`gdifs`."""


class InvalidGraphError(GDIFSError):
    """The directed multigraph violates a structural requirement."""


class PathCapError(GDIFSError):
    """Requested path length is above the configured enumeration cap."""


class MapError(GDIFSError):
    """A contraction map is malformed, non-injective or non-contractive."""


class BudgetExceededError(GDIFSError):
    """A computation would enumerate more objects than its budget allows."""


class ConvergenceError(GDIFSError):
    """An iterative procedure failed to converge."""


class AmbiguousAddressError(GDIFSError):
    """Two candidate cylinders are too close to decide a coding symbol."""


class SeparationError(GDIFSError):
    """A separation condition required by an operation is not certified."""


class HypothesisError(GDIFSError):
    """Neither conjugacy regime's hypotheses hold for a pair of systems."""


class ConfigError(GDIFSError):
    """A system definition file could not be parsed or validated."""
