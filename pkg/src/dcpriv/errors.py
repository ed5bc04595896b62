"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code so the command layer can translate
failures mechanically (see ``dcpriv.cli``): usage/config problems exit 2,
mathematical/domain problems exit 3, file I/O problems exit 4.
"""


class DcprivError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(DcprivError):
    """Bad arguments, malformed config, or misuse of an API contract."""

    exit_code = 2


class DomainError(DcprivError):
    """Input is syntactically fine but mathematically unusable."""

    exit_code = 3


class DegenerateDataError(DomainError):
    """Data has no exploitable randomness (e.g. a constant column)."""


class DataIOError(DcprivError):
    """File could not be read, parsed, or written."""

    exit_code = 4
