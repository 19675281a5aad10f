"""Exception hierarchy shared by every module."""


class StochMCFError(Exception):
    """Base class for all package errors."""


class TubeTooWide(StochMCFError):
    pass


class NotEmbedded(StochMCFError):
    pass


class OutsideTube(StochMCFError):
    pass


class MeshMismatch(StochMCFError):
    pass


class NonFinite(StochMCFError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class CFLViolation(StochMCFError):
    pass


class Degenerate(StochMCFError):
    pass


class DegenerateGrid(StochMCFError):
    pass


class DegenerateTangent(StochMCFError):
    pass


class EmptyEnsemble(StochMCFError):
    pass


class IdenticalFields(StochMCFError, ZeroDivisionError):
    """Raised when a contraction ratio is requested for u1 == u2."""


class ConfigError(StochMCFError):
    """Carries one diagnostic string per violated constraint."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
