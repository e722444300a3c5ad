"""Exception types raised across the package."""


class TamanError(Exception):
    """Base class for all package errors."""


class ShapeError(TamanError, ValueError):
    pass


class CacheError(TamanError, ValueError):
    pass


class LabelError(TamanError, ValueError):
    pass


class ScaleError(TamanError, ValueError):
    pass


class NormalizationError(TamanError, ValueError):
    pass


class ConfigError(TamanError, ValueError):
    pass


class DataError(TamanError, ValueError):
    pass


class FormatError(TamanError, ValueError):
    """Malformed file. ``offset`` is the byte offset where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CompletenessError(TamanError, ValueError):
    pass


class CompatibilityError(TamanError, ValueError):
    pass


class DivergenceError(TamanError, RuntimeError):
    pass
