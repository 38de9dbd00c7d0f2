"""Exception types raised across the lab."""


class LabError(Exception):
    pass


class InvalidArgumentError(LabError, ValueError):
    pass


class CapacityError(LabError):
    pass


class DegenerateModelError(LabError):
    pass


class ValidationError(LabError, ValueError):
    pass


class ParseError(LabError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotPSDError(LabError):
    def __init__(self, message, pivot=None):
        self.pivot = pivot
        super().__init__(message)


class IndependenceViolationError(LabError):
    pass


class EmptyLevelSetError(LabError):
    pass


class ConfigError(LabError):
    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
