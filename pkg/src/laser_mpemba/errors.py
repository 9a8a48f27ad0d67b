"""Exception hierarchy.

Every numerical failure derives from :class:`NumericalError` so the CLI can map
it to exit code 2 without enumerating cases.
"""


class LaserMpembaError(Exception):
    """Base class for all package errors."""


class NumericalError(LaserMpembaError):
    """A computation could not produce a trustworthy result."""


class DimensionMismatch(LaserMpembaError, ValueError):
    pass


class TruncationError(NumericalError):
    """The Fock-space window cuts off non-negligible stationary mass."""


class InvalidStationary(NumericalError):
    pass


class ToleranceFailure(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class BackTransformOverflow(NumericalError):
    pass


class InsufficientModes(NumericalError):
    """Truncated spectral series does not reconstruct the initial state.

    ``error`` holds the l1 reconstruction error at t = 0.
    """

    def __init__(self, error: float, n_modes: int):
        self.error = error
        self.n_modes = n_modes
        super().__init__(
            f"{n_modes} modes reconstruct the initial state with l1 error {error:.3e}"
        )


class FitWindowEmpty(NumericalError):
    pass


class GridMismatch(LaserMpembaError, ValueError):
    pass


class TailMassError(LaserMpembaError, ValueError):
    pass


class IndexOutOfRange(LaserMpembaError, IndexError):
    pass
