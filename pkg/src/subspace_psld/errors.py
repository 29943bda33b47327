"""Exception types raised across the package."""

import numpy as np


class DimensionError(ValueError):
    """Array shapes or requested sizes are inconsistent."""


class AssumptionViolation(ValueError):
    """(AS)^T (AS) is not positive definite, so the signal is not recoverable."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """A normal-equation matrix is singular (too few samples)."""


class ConfigError(ValueError):
    """Invalid sampler or experiment configuration."""
