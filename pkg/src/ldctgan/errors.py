"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`LDCTError`.
The three mid-level families (config, data, numeric) map to the CLI exit codes.
"""


class LDCTError(Exception):
    exit_code = 1


class ConfigError(LDCTError, ValueError):
    exit_code = 2


class DataError(LDCTError):
    exit_code = 3


class NumericError(LDCTError, ArithmeticError):
    exit_code = 4


# configuration / specification problems
class InvalidSpec(ConfigError):
    pass


class SpecMismatch(ConfigError):
    pass


class SpecHashMismatch(ConfigError):
    pass


class AlreadyInflated(ConfigError):
    pass


# data problems
class MalformedFile(DataError):
    pass


class MissingTag(DataError):
    pass


class UnsupportedEncoding(DataError):
    pass


class TensorFormatError(DataError):
    pass


class BadMagic(TensorFormatError):
    pass


class DimMismatch(TensorFormatError):
    pass


class TruncatedPayload(TensorFormatError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class EmptyDataset(DataError):
    pass


class PairingError(DataError):
    pass


class ShapeMismatch(DataError, ValueError):
    pass


class ImageTooSmall(ShapeMismatch):
    pass


class OverlappingROIs(DataError, ValueError):
    pass


# numeric aborts
class DegenerateRange(NumericError):
    pass


class ZeroVariance(NumericError):
    pass


class NonFiniteLoss(NumericError):
    pass
