"""Exception hierarchy shared by all modules."""


class LinopGPError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LinopGPError, ValueError):
    pass


class CapabilityError(LinopGPError, NotImplementedError):
    """Requested operation is outside what the kernel algebra supports."""


class ConfigurationError(LinopGPError, ValueError):
    """Operator parameters or config tables are inconsistent."""


class NumericalError(LinopGPError, ArithmeticError):
    pass


class OperatorSyntaxError(LinopGPError, ValueError):
    """Raised by the operator parser; carries a 1-based line and column."""

    def __init__(self, message, text="", pos=0):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        self.line = line
        self.column = col
        self.pos = pos
        super().__init__(f"{message} (line {line}, column {col})")


class TrainingError(LinopGPError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class IngestionError(LinopGPError, ValueError):
    pass


class NoUsablePointsError(IngestionError):
    """Input parsed fine but leaves nothing to fit (e.g. every f point lacks a regulator)."""


class DataGenerationError(LinopGPError):
    pass
