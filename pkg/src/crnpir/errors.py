"""Exception hierarchy shared by every protocol module."""


class PIRError(Exception):
    """Base class for all errors raised by crnpir."""


class ParameterError(PIRError, ValueError):
    """Protocol parameters violate their validity constraints."""


class FieldDomainError(PIRError, ValueError):
    """A field operation was given an input outside its domain."""


class DecodeError(PIRError):
    """No polynomial within the unique-decoding radius fits the points."""


class InsufficientSharesError(PIRError):
    """Fewer shares than the reconstruction threshold requires."""


class InsufficientResponsesError(InsufficientSharesError):
    """Fewer server responses than the recovery degree requires."""


class ByzantineOverloadError(PIRError):
    """More corrupted responses than the decoder can correct."""


class CoverageError(PIRError, ValueError):
    """A spectrum key falls outside the configured grid."""


class IndexRangeError(PIRError, IndexError):
    """A row index is outside 1..r."""


class ProtocolError(PIRError):
    """A query or response does not match the database dimensions."""


class IncompleteResponseError(PIRError):
    """A protocol that needs every server did not hear from all of them."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = frozenset(missing)


class QuorumError(IncompleteResponseError):
    """The client engine did not collect enough responses before timing out."""


class ConsistencyError(PIRError):
    """Servers advertise different database digests."""


class RemoteError(PIRError):
    """A server answered with an ERROR frame."""

    def __init__(self, code, message):
        super().__init__(f"server error {code}: {message}")
        self.code = code


class DatabaseFormatError(PIRError):
    """Base class for database file problems."""


class DigestError(DatabaseFormatError):
    pass


class TruncatedError(DatabaseFormatError):
    pass


class VersionError(DatabaseFormatError):
    pass
