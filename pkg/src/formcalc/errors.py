"""Exception hierarchy.

Numerical failures (``NotDetermining``, ``NotUnisolvent``, ``DegenerateSimplexError``)
share the ``NumericalFailure`` base so the CLI can map them to one exit code.
"""


class FormcalcError(Exception):
    """Base class for all package errors."""


class DimensionError(FormcalcError, ValueError):
    """Shapes, ambient dimensions or form orders do not match."""


class NumericalFailure(FormcalcError):
    """A computation hit a condition that makes the result meaningless."""


class DegenerateSimplexError(NumericalFailure, ValueError):
    """A simplex has (numerically) zero k-dimensional measure."""


class NotDetermining(NumericalFailure):
    """The Gram matrix of a current family is not positive definite on the space."""


class NotUnisolvent(NumericalFailure):
    """The square generalized Vandermonde matrix is singular (or M != N)."""


class QuadratureError(FormcalcError):
    """Requested exact integration is not possible with the given rule."""


class SamplingError(FormcalcError):
    """Rejection sampling inside a body gave up."""


class ComassError(FormcalcError, RuntimeError):
    """The comass optimizer violated the Euclidean sandwich (internal bug)."""


class MappingError(FormcalcError):
    """A map cannot be applied as requested (singular Jacobian, non-affine pushforward)."""
