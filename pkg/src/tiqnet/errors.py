"""Exception hierarchy shared by all tiqnet modules."""


class TiqnetError(Exception):
    """Base class for errors raised by tiqnet."""


class InvariantViolation(TiqnetError, ValueError):
    """A network description breaks one of its structural invariants."""


class ParseError(TiqnetError, ValueError):
    """A network file could not be read or has a malformed field."""


class NotHurwitz(TiqnetError):
    """The state symbol A(sigma) has an eigenvalue too close to the imaginary axis."""


class SingularResolvent(TiqnetError):
    """The resolvent (sI - A(sigma))^{-1} was requested at a spectral point."""


class SampleTooCloseToSpectrum(SingularResolvent):
    pass


class NotAdmissible(TiqnetError):
    """The risk-sensitivity parameter violates the spectral admissibility bound."""


class NotAdmissibleFinite(NotAdmissible):
    pass


class NotHermitian(TiqnetError, ValueError):
    pass


class HomotopyDiverged(TiqnetError):
    """The Riccati continuation drifted away from the closed-form solution."""
