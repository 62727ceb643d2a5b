class RTEError(Exception):
    pass


class ConvergenceError(RTEError):
    """Krylov iteration hit its iteration cap; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class FactorizationError(RTEError):
    """A pivot block could not be factorised."""

    def __init__(self, message, level=None, box=None):
        super().__init__(message)
        self.level = level
        self.box = box


class SingularSystemError(RTEError):
    pass


class UnsupportedBackendError(RTEError):
    pass
