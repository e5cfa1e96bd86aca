class QsnnclError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(QsnnclError, ValueError):
    """An invalid parameter value or combination."""


class DimensionError(QsnnclError, ValueError):
    """Array shapes do not match the model."""


class IdxFormatError(QsnnclError, ValueError):
    """Malformed IDX file."""


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


class IdxShapeError(IdxFormatError):
    pass


class InsufficientSamplesError(QsnnclError, ValueError):
    pass


class UnlabeledModelError(QsnnclError, RuntimeError):
    pass


class IncompleteMatrixError(QsnnclError, ValueError):
    pass
