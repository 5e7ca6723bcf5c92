"""Exception hierarchy shared by the scattering, asymptotics and evolution layers."""


class QDNLSError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class SingularPointError(QDNLSError, ValueError):
    """Raised for k = 0 where the sector geometry degenerates."""

    exit_code = 2


class DomainError(QDNLSError, ValueError):
    """An eigenfunction column or scattering entry was requested outside its sector."""

    exit_code = 2


class InvalidDataError(QDNLSError, ValueError):
    """Input data violates a precondition (NaN samples, |r| >= 1, bad grid...)."""

    exit_code = 2


class NumericalError(QDNLSError, RuntimeError):
    """An integrator or quadrature failed to reach its tolerance."""

    exit_code = 1


class SolitonAssumptionError(QDNLSError):
    """s11 or sA11 came within the zero tolerance: discrete spectrum suspected."""

    exit_code = 3


class InstabilityError(NumericalError):
    """Time stepping blew up."""


class DomainTooSmallError(NumericalError):
    """The periodic window is too small: mass reached the boundary."""


class DependencyError(QDNLSError):
    """A CLI step needs an upstream artifact that does not exist."""

    exit_code = 2
