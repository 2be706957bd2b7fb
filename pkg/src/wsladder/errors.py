"""Exception types shared across the package."""


class WsLadderError(Exception):
    """Base class for all package errors."""


class InvalidArgument(WsLadderError, ValueError):
    pass


class InvalidGeometry(WsLadderError, ValueError):
    pass


class InvalidMesh(WsLadderError, ValueError):
    pass


class NumericalFailure(WsLadderError, RuntimeError):
    """Solver did not converge. ``diagnostics`` holds whatever state was available."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FactorizationFailure(NumericalFailure):
    pass


class ModeNotFound(WsLadderError, LookupError):
    pass
