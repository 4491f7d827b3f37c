"""Exception hierarchy; the CLI maps each family to an exit code."""


class FdiError(Exception):
    """Base class for all package errors."""


class UsageError(FdiError):
    """Bad configuration or command-line usage."""


class DataError(FdiError):
    """Missing, malformed or inconsistent input data."""


class NumericError(FdiError):
    """Training or evaluation produced a non-finite value."""


class CubeFormatError(DataError):
    pass


class VersionMismatchError(CubeFormatError):
    pass


class TruncatedPayloadError(CubeFormatError):
    pass


class ChecksumError(CubeFormatError):
    pass


class SamplingError(DataError):
    pass
