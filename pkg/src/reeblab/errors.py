"""Exception hierarchy shared by every module.

Each error carries a stable ``code`` so the CLI can emit machine-readable
error records.
"""


class LabError(Exception):
    code = "LabError"

    def record(self) -> dict:
        return {"error": self.code, "message": str(self)}


class NotHyperbolic(LabError):
    code = "NotHyperbolic"


class BadParams(LabError):
    code = "BadParams"


class DiscretenessSuspect(LabError):
    code = "DiscretenessSuspect"


class NonTermination(LabError):
    code = "NonTermination"


class BudgetExceeded(LabError):
    code = "BudgetExceeded"

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class HorizonExceeded(LabError):
    code = "HorizonExceeded"


class InsufficientData(LabError):
    code = "InsufficientData"


class ParamViolation(LabError):
    code = "ParamViolation"

    def __init__(self, constraint: str, message: str = ""):
        super().__init__(f"{constraint}: {message}" if message else constraint)
        self.constraint = constraint


class OutOfChart(LabError):
    code = "OutOfChart"


class EventResolutionFailure(LabError):
    code = "EventResolutionFailure"


class RefinementDiverged(LabError):
    code = "RefinementDiverged"


class Lemma2Violation(LabError):
    code = "Lemma2Violation"


class ClassCollision(LabError):
    code = "ClassCollision"


class NotIrreducible(LabError):
    code = "NotIrreducible"


class EquivarianceViolation(LabError):
    code = "EquivarianceViolation"


class AssertionFailed(LabError):
    code = "AssertionFailed"


class ConfigError(LabError):
    code = "ConfigError"
