"""Exception taxonomy for the half-line scattering toolkit.

Every failure mode raised by the library derives from :class:`HalflineError`
so callers can catch one base type at pipeline boundaries. Numerical
property *violations* (bound checks, cross-validation misses) are reported
as data, not exceptions; only genuine can't-continue conditions raise.
"""

from __future__ import annotations


class HalflineError(Exception):
    """Base class for all toolkit errors."""


class DomainError(HalflineError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class DataError(HalflineError, ValueError):
    """Input data is malformed: non-finite samples, ragged arrays, bad JSON."""


class StiffnessError(HalflineError, RuntimeError):
    """Adaptive ODE step size underflowed; the problem is stiffer than the
    scheme tolerates."""


class IterationError(HalflineError, RuntimeError):
    """Fixed-point iteration failed to converge within the iteration budget.

    Carries the observed contraction estimate so the caller can judge how
    far from convergence the run stopped.
    """

    def __init__(self, message: str, contraction_ratio: float | None = None):
        super().__init__(message)
        self.contraction_ratio = contraction_ratio


class ConditioningError(HalflineError, RuntimeError):
    """A denominator is numerically too close to zero to trust the result."""


class ResonanceError(HalflineError, RuntimeError):
    """The potential exhibits a zero-energy resonance; this degenerate case
    is detected and refused rather than silently mishandled."""


class CoverageError(HalflineError, ValueError):
    """A sampled field or kernel does not cover the range the operation
    needs."""


class AccuracyError(HalflineError, RuntimeError):
    """A quadrature or extrapolation failed to reach its target accuracy.

    The ``achieved`` attribute records the best error estimate reached.
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class GridMismatchError(HalflineError, ValueError):
    """Two sampled objects live on incompatible grids and resampling is not
    permitted for the requested operation."""
