"""Error types shared across the package."""


class InvalidStructureError(ValueError):
    """Structure constants fail antisymmetry or the Jacobi identity."""


class NotNilpotentError(ValueError):
    """The lower central series stabilizes at a nonzero subspace."""


class UnsupportedClassError(ValueError):
    """Nilpotency class exceeds the supported hard-coded group-law depth."""


class NotApplicableError(ValueError):
    """A construction's structural preconditions fail for the given system."""


class ConfigError(ValueError):
    """A configuration file is missing, malformed, or inconsistent."""
