"""Exception types shared across the package."""


class CrmsimError(Exception):
    """Base class for all package errors."""


class NonSquare(CrmsimError):
    """A matrix argument is not square."""


class NotHurwitz(CrmsimError):
    """A matrix required to be Hurwitz has an eigenvalue with
    real part >= -1e-12."""


class SolveFailure(CrmsimError):
    """A linear solve produced no usable solution (singular system or
    residual above tolerance)."""


class InvalidConfig(CrmsimError):
    """Parameters violate a constructor precondition."""


class DegenerateGradient(CrmsimError):
    """Projection asked to activate with a zero boundary gradient."""


class DimensionMismatch(CrmsimError):
    """Vector or matrix dimensions are inconsistent."""


class ConfigError(CrmsimError):
    """A scenario configuration is malformed or inconsistent."""


class NonFinite(CrmsimError):
    """Integration aborted after a state component exceeded 1e12.

    Carries the partial trace in ``args[1]`` when raised by the
    simulator so callers can inspect what happened before divergence.
    """


class UnknownSignal(CrmsimError):
    """A metric was requested for a signal the trace does not contain."""


class MissingShadow(CrmsimError):
    """Open-loop reference error requested but the scenario did not
    co-simulate the open-loop reference model."""


class DeltaTooLarge(CrmsimError):
    """Observer-based guarantees requested with Delta(ell) >= 1, where
    the contraction argument behind them is void."""


class TimescaleViolation(CrmsimError):
    """Interval envelope requested with ell below the threshold gain
    that the slow-adaptation condition requires."""


class SingularM1(CrmsimError):
    """The peak coefficient of the reference-model transient has a
    nonpositive denominator (sigma + 2*ell - sigma*m**2 <= 0), so the
    envelope assembly is undefined for these constants."""
