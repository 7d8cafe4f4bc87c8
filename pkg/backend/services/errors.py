"""
Exception hierarchy shared by the services, the CLI and the HTTP app
"""


class DilemmaLabError(Exception):
    """Base class for every domain error raised by the services"""


class ConfigurationError(DilemmaLabError, ValueError):
    """Out-of-range parameter or inconsistent run configuration"""


class DegenerateDenominatorError(DilemmaLabError, ArithmeticError):
    """Gini denominator r1 + r2 is not positive"""


class EmptyInputError(DilemmaLabError, ValueError):
    """Metric or emitter called without any data"""


class HeterogeneousResultsError(DilemmaLabError, ValueError):
    """Episode results from different configurations were mixed"""


class OracleError(DilemmaLabError, ValueError):
    """Best-response oracle asked to solve an MDP it cannot represent"""


class PlanParseError(DilemmaLabError):
    """Experiment plan file is missing or is not valid JSON"""


class PlanValidationError(DilemmaLabError, ValueError):
    """Experiment plan parsed but violates the schema"""

    def __init__(self, message: str, fields=None):
        super().__init__(message)
        self.fields = list(fields or [])


class OutputError(DilemmaLabError, OSError):
    """Writing a result file failed"""

    def __init__(self, path, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
