"""Exception hierarchy shared by all modules."""


class LqoError(Exception):
    """Base class for numerical failures raised by this package."""


class NotHurwitz(LqoError):
    """A state matrix that must be stable has an eigenvalue with Re >= 0."""


class SingularPencil(LqoError):
    """Sylvester coefficient spectra (nearly) intersect after negation."""


class RankDeficient(LqoError):
    """A Grassmann representative lost full column rank."""


class BiorthogonalityViolated(LqoError):
    pass


class SingularGram(LqoError):
    """An r x r Gram-type matrix is too ill-conditioned to invert.

    Raised for singular reduced Gramians in the alternating iteration and for
    ill-conditioned ``V^T H V`` in the stability-preserving reduction.
    """


SingularPhat = SingularGram
SingularQhat = SingularGram
IllConditionedGram = SingularGram


class LineSearchExhausted(LqoError):
    pass


class ResolventSingular(LqoError):
    """The Laguerre scaling parameter collides with the spectrum."""


class DimensionMismatch(LqoError, ValueError):
    pass


class ShiftSingular(LqoError):
    pass


class NonFiniteState(LqoError):
    """Time integration produced inf/nan (unstable model or dt too large)."""


class GridMismatch(LqoError, ValueError):
    pass
