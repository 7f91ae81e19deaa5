"""Exception types shared across the toolkit."""


class RnmError(Exception):
    """Base class for all toolkit errors."""


class DegenerateSingularityError(RnmError):
    """The leading homogeneous part of the Laplacian vanishes somewhere
    on the unit circle, so the singular point is not of admissible type."""


class RankDeficientError(RnmError):
    """A moment matrix failed its Cholesky factorization.

    Carries the index of the first failing pivot in ``index``.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TruncationInsufficientError(RnmError):
    """A series was evaluated at a point where the retained terms do not
    meet the relative tail bound; increase the truncation order."""


class RootAtZeroError(RnmError):
    """The one-point function vanishes at the requested root, so the
    Berezin kernel rooted there is undefined."""


class QuadratureError(RnmError):
    """Adaptive quadrature failed to reach its target tolerance."""


class ConfigError(RnmError):
    """Malformed or inconsistent run configuration."""
