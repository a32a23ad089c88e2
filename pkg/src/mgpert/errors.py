"""Exception types shared across the package."""


class MgpertError(Exception):
    """Base class for all package errors."""


class InvalidParams(MgpertError):
    """A parameter set violates its declared bounds."""


class DegenerateParams(MgpertError):
    """The exponential-tilt denominator 1 + sqrt(2)*gamma/(sigma*xi0) vanishes."""


class NonpositiveVariance(MgpertError):
    """log(V/V0) requested for V <= 0."""


class OutOfBounds(MgpertError):
    """Option price violates the no-arbitrage bracket for implied vol."""


class NoConvergence(MgpertError):
    """Iterative solver hit its iteration cap without meeting tolerance."""


class QuadratureNotConverged(MgpertError):
    """Successive quadrature refinements disagree beyond tolerance."""


class EmptyQuoteSet(MgpertError):
    """Calibration objective evaluated on an empty quote set."""
