"""Exception types shared across the package."""


class EfsegError(Exception):
    """Base class for all package-specific errors."""


class DomainError(EfsegError, ValueError):
    """A natural parameter lies outside the family's domain, or an
    observation lies outside the family's support."""


class BoundaryError(EfsegError, ValueError):
    """A mean vector lies on or outside the boundary of the image of the
    gradient of the log-partition function."""


class InfeasibleError(EfsegError, ValueError):
    """A segmentation request cannot be satisfied (e.g. kmax * min_len > n)."""


class CalibrationError(EfsegError, RuntimeError):
    """Slope-heuristic calibration failed; usually a larger kmax is needed."""


class GenerationError(EfsegError, RuntimeError):
    """Scenario generation exhausted its rejection budget."""


class InputError(EfsegError, ValueError):
    """Malformed input file (CSV series, FASTA, partition JSON)."""
