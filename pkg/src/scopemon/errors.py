"""Exception hierarchy shared by every scopemon module."""


class ScopeError(ValueError):
    """Base class for all scopemon input and state errors."""


class EmptySample(ScopeError):
    pass


class NonFiniteValue(ScopeError):
    def __init__(self, index, value=None):
        self.index = index
        self.value = value
        super().__init__(f"non-finite value {value!r} at index {index}")


class DegenerateSample(ScopeError):
    """Pooled sample carries no spread (all values identical, zero IQR, ...)."""


class InsufficientSamples(ScopeError):
    pass


class DimensionMismatch(ScopeError):
    pass


class UnsupportedKind(ScopeError):
    pass


class InvalidAlpha(ScopeError):
    pass


class SizeExceedsData(ScopeError):
    pass


class DegenerateData(ScopeError):
    pass


class InsufficientLabelled(ScopeError):
    pass


class DegeneratePoints(ScopeError):
    pass


class NonConvergence(ScopeError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or []
        super().__init__(message)


class VersionMismatch(ScopeError):
    pass


class IdMismatch(ScopeError):
    def __init__(self, message, window_ids=()):
        self.window_ids = list(window_ids)
        super().__init__(message)


class ParseError(ScopeError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")

