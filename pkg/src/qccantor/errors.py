"""Exception hierarchy. Every error carries a short machine-readable code."""


class QCCantorError(Exception):
    code = "error"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}


class DomainError(QCCantorError, ValueError):
    code = "domain"


class BracketError(QCCantorError, ValueError):
    code = "bracket"


class ConvergenceError(QCCantorError, RuntimeError):
    code = "convergence"


class ResourceError(QCCantorError, RuntimeError):
    code = "resource"


class ProgressError(QCCantorError, RuntimeError):
    code = "progress"


class BuildError(QCCantorError, RuntimeError):
    code = "build"


class ConsistencyError(QCCantorError, RuntimeError):
    code = "consistency"


class StateError(QCCantorError, RuntimeError):
    code = "state"


class PreconditionError(QCCantorError, ValueError):
    code = "precondition"

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["report"] = self.report
        return out


class ResolutionError(QCCantorError, ValueError):
    code = "resolution"


class AreaError(QCCantorError, ValueError):
    code = "area"


class RangeError(QCCantorError, ValueError):
    code = "range"

    def __init__(self, message: str, max_feasible: int | None = None):
        super().__init__(message)
        self.max_feasible = max_feasible

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["max_feasible"] = self.max_feasible
        return out


class UnsupportedError(QCCantorError, ValueError):
    code = "unsupported"


class FormatError(QCCantorError, ValueError):
    code = "format"


class UsageError(QCCantorError, ValueError):
    code = "usage"


class DegenerateError(QCCantorError, ArithmeticError):
    code = "degenerate"
