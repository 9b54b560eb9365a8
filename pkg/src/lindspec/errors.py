"""Exception types raised by lindspec."""


class LindspecError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(LindspecError, ValueError):
    pass


class ShapeError(LindspecError, ValueError):
    pass


class ParameterError(LindspecError, ValueError):
    pass


class DimensionOverflowError(LindspecError):
    """Explicit assembly or dense diagonalization refused because the problem is too large."""


class ConvergenceError(LindspecError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateKernelError(LindspecError):
    """More than one numerical zero mode; ``kernel`` holds the basis (list of operators)."""

    def __init__(self, message, kernel=None, values=None):
        super().__init__(message)
        self.kernel = kernel or []
        self.values = values if values is not None else []


class SplitUndefinedError(LindspecError, ValueError):
    pass


class PairingError(LindspecError, ValueError):
    pass


class DecompositionUnavailableError(LindspecError):
    """Spectral decomposition needs a diagonalizable Liouvillian; see ``spectra.detect_jordan``."""


class SymmetryError(LindspecError, ValueError):
    pass


class IncompleteKernelError(LindspecError, ValueError):
    pass


class InvalidStateError(LindspecError, ValueError):
    pass


class NotFoundError(LindspecError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(LindspecError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class ConfigError(LindspecError, ValueError):
    pass
